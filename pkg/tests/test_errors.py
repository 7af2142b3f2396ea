"""Tests for error hierarchy."""

from dyadic_cubes.core.errors import (
    AsymmetricInput,
    BallBoundViolated,
    CorruptArtifact,
    DepthUnavailable,
    DyadicCubesError,
    EmptyAnnulus,
    InsufficientDepth,
    InvalidInput,
    NoChain,
    NoConvergence,
    NoSingletonRoot,
    PairingOverflow,
    SpecTooLarge,
    StrictRatioError,
    TriangleViolation,
)


def test_hierarchy():
    for cls in (
        InvalidInput, AsymmetricInput, TriangleViolation, SpecTooLarge, EmptyAnnulus,
        PairingOverflow, BallBoundViolated, NoSingletonRoot, NoChain, NoConvergence,
        DepthUnavailable, InsufficientDepth, CorruptArtifact, StrictRatioError,
    ):
        assert issubclass(cls, DyadicCubesError)


def test_exception_attributes():
    e = TriangleViolation(0, 1, 2, excess=3.0)
    assert (e.a, e.b, e.c) == (0, 1, 2)
    assert "d(0,2)" in str(e)

    e = PairingOverflow(k=0, block=2, pairs=6, limit=3)
    assert e.limit == 3
    assert "level 1" in str(e)
    assert "N(N-1)/2 = 3" in str(e)


def test_exception_message():
    e = StrictRatioError(0.25, 0.001, "TAIL")
    assert "TAIL" in str(e)
    assert e.r0 == 0.001

    e = EmptyAnnulus(4, 1.0, 2.0, below=3, above=None)
    assert e.below == 3
    assert "around 4" in str(e)

    e = CorruptArtifact("run/cubes.json", "missing")
    assert str(e) == "run/cubes.json: missing"
