"""Custom exception hierarchy."""

from __future__ import annotations


class DyadicCubesError(Exception):
    """Base exception for dyadic-cubes."""


class InvalidInput(DyadicCubesError):
    """A precondition on arguments or configuration was breached."""


class AsymmetricInput(DyadicCubesError):
    """Distance matrix is not symmetric within tolerance."""

    def __init__(self, a: int, b: int, delta: float):
        self.a = a
        self.b = b
        self.delta = delta
        super().__init__(f"Asymmetric distances: |d({a},{b}) - d({b},{a})| = {delta:.3g}")


class TriangleViolation(DyadicCubesError):
    """d(a,c) > d(a,b) + d(b,c) for the reported triple."""

    def __init__(self, a: int, b: int, c: int, excess: float = 0.0):
        self.a = a
        self.b = b
        self.c = c
        self.excess = excess
        super().__init__(
            f"Triangle inequality fails: d({a},{c}) exceeds d({a},{b}) + d({b},{c}) by {excess:.3g}"
        )


class NonzeroDiagonal(DyadicCubesError):
    """Distance matrix has d(i,i) != 0."""

    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"Nonzero diagonal entry d({index},{index}) = {value!r}")


class SpecTooLarge(DyadicCubesError):
    """Generator descriptor would exceed the configured point cap."""

    def __init__(self, descriptor: str, count: int, cap: int):
        self.descriptor = descriptor
        self.count = count
        self.cap = cap
        super().__init__(f"{descriptor} has {count} points, cap is {cap}")


class DegenerateSpace(DyadicCubesError):
    """Space too small for the requested estimate."""


class SeedsTooClose(DyadicCubesError):
    """Seed points violate the separation condition."""

    def __init__(self, a: int, b: int, distance: float, separation: float):
        self.a = a
        self.b = b
        self.distance = distance
        self.separation = separation
        super().__init__(
            f"Seeds {a} and {b} are {distance:.6g} apart, separation requires {separation:.6g}"
        )


class WindowEmpty(DyadicCubesError):
    """Scale window has no levels."""


class EmptyAnnulus(DyadicCubesError):
    """No point in the annulus inner <= d(center, z) < outer."""

    def __init__(
        self,
        center: int,
        inner: float,
        outer: float,
        below: int | None = None,
        above: int | None = None,
    ):
        self.center = center
        self.inner = inner
        self.outer = outer
        self.below = below
        self.above = above
        super().__init__(
            f"Empty annulus around {center}: [{inner:.6g}, {outer:.6g}) "
            f"(nearest inside={below}, nearest outside={above})"
        )


class PairingOverflow(DyadicCubesError):
    """A block needs more parent pairs than N(N-1)/2 allows."""

    def __init__(self, k: int, block: int, pairs: int, limit: int):
        self.k = k
        self.block = block
        self.pairs = pairs
        self.limit = limit
        super().__init__(
            f"Block {block} at level {k + 1} has {pairs} parent pairs, limit N(N-1)/2 = {limit}; "
            "the packing constant N is underestimated"
        )


class DesignationConflict(DyadicCubesError):
    """A child was designated twice or outside its block."""

    def __init__(self, k: int, child: int, reason: str):
        self.k = k
        self.child = child
        self.reason = reason
        super().__init__(f"Child ({k + 1},{child}): {reason}")


class ClassificationError(DyadicCubesError):
    """Class A and class B overlap at a level transition."""


class BallBoundViolated(DyadicCubesError):
    """A cube escapes (or fails to contain) its reference ball."""

    def __init__(self, node: tuple[int, int], point: int, distance: float, bound: float):
        self.node = node
        self.point = point
        self.distance = distance
        self.bound = bound
        super().__init__(
            f"Node {node}: point {point} at distance {distance:.6g} breaks ball bound {bound:.6g}"
        )


class NoSingletonRoot(DyadicCubesError):
    """Coarsest level does not consist of a single node."""

    def __init__(self, level: int, count: int):
        self.level = level
        self.count = count
        super().__init__(f"Coarsest level {level} has {count} nodes; a single root is required")


class NoChain(DyadicCubesError):
    """No chain of at most three cubes joins the two points."""

    def __init__(self, y: int, z: int, k: int, distance: float, nearest_miss: float | None = None):
        self.y = y
        self.z = z
        self.k = k
        self.distance = distance
        self.nearest_miss = nearest_miss
        super().__init__(
            f"No 3-cube chain at level {k} between {y} and {z} (d={distance:.6g}, "
            f"nearest miss={nearest_miss})"
        )


class NoConvergence(DyadicCubesError):
    """Iterative solver exhausted its iteration cap."""

    def __init__(self, iterations: int, residual: float | None = None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"No convergence after {iterations} iterations (residual={residual})")


class DepthUnavailable(DyadicCubesError):
    """Requested refinement level lies beyond the truncated tree."""

    def __init__(self, level: int, max_level: int):
        self.level = level
        self.max_level = max_level
        super().__init__(f"Level {level} requested, finest available level is {max_level}")


class InsufficientDepth(DyadicCubesError):
    """Too few refinement depths to fit a decay slope."""

    def __init__(self, usable: int):
        self.usable = usable
        super().__init__(
            f"Only {usable} depths have a sampled node whose sink is nonempty, at least 3 are required"
        )


class CorruptArtifact(DyadicCubesError):
    """Artifact file missing or not matching the schema."""

    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


class StrictRatioError(DyadicCubesError):
    """Strict mode was given a ratio above the certified r0."""

    def __init__(self, r: float, r0: float, condition: str):
        self.r = r
        self.r0 = r0
        self.condition = condition
        super().__init__(f"r={r:.6g} exceeds certified r0={r0:.6g}; {condition} fails")
