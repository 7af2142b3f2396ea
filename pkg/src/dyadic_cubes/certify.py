"""Constant bundles for the parent construction and their feasibility certificate.

Strict bundles are derived by a fixed recipe so every inequality holds with
slack. Relaxed bundles take a user ratio r (and optionally the alphas); failed
inequalities are recorded but do not stop the pipeline.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Literal

from dyadic_cubes.core.errors import InvalidInput

Mode = Literal["strict", "relaxed"]


@dataclass
class ConstantBundle:
    c_star: float
    C_star: float
    gamma: float
    N: int
    alpha1: float
    alpha2: float
    alpha3: float
    alpha6: float
    r0: float
    r: float
    mode: Mode = "strict"

    @property
    def alpha4(self) -> float:
        return self.alpha1 / (1 - self.r0)

    @property
    def alpha5(self) -> float:
        return self.alpha2 - self.alpha1 * self.r0 / (1 - self.r0)

    @property
    def C1(self) -> float:
        return self.alpha5

    @property
    def C2(self) -> float:
        return self.alpha4

    @property
    def C3(self) -> float:
        return self.alpha3 - self.C_star - self.alpha4 * self.r0

    @property
    def max_pairs(self) -> int:
        return self.N * (self.N - 1) // 2

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out.update(alpha4=self.alpha4, alpha5=self.alpha5, C1=self.C1, C2=self.C2, C3=self.C3)
        out["conditions"] = [asdict(c) for c in evaluate_conditions(self, self.r)]
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> ConstantBundle:
        keys = ("c_star", "C_star", "gamma", "N", "alpha1", "alpha2", "alpha3",
                "alpha6", "r0", "r", "mode")
        return cls(**{k: raw[k] for k in keys})


@dataclass
class Condition:
    """One inequality lhs < rhs evaluated at a given r."""

    name: str
    lhs: float
    rhs: float
    holds: bool
    slack: float


# ── Sequences ────────────────────────────────────────────────────


def _geometric_sum(gamma: float, j: int) -> float:
    """(gamma^j - 1) / (gamma - 1), equal to j at gamma = 1; inf once gamma^j overflows."""
    if j == 0:
        return 0.0
    if gamma == 1:
        return float(j)
    exponent = j * math.log(gamma)
    if exponent > 700:
        return math.inf
    return math.expm1(exponent) / (gamma - 1)


def beta_sequence(C_star: float, gamma: float, j: int) -> float:
    """beta_j by the recurrence beta_0 = 0, beta_j = gamma beta_{j-1} + (1+gamma)(2+gamma)C*."""
    if j < 0:
        raise InvalidInput("j must be >= 0")
    step = (1 + gamma) * (2 + gamma) * C_star
    beta = 0.0
    for _ in range(j):
        beta = gamma * beta + step
    return beta


def beta_closed_form(C_star: float, gamma: float, j: int) -> float:
    if j < 0:
        raise InvalidInput("j must be >= 0")
    return C_star * (1 + gamma) * (2 + gamma) * _geometric_sum(gamma, j)


def alpha6_for(C_star: float, gamma: float, N: int) -> float:
    return beta_closed_form(C_star, gamma, N * (N - 1) // 2)


# ── Derivation ───────────────────────────────────────────────────


def _validate_inputs(c_star: float, C_star: float, gamma: float, N: int) -> None:
    if not 0 < c_star < C_star:
        raise InvalidInput(f"need 0 < c* < C*, got c*={c_star}, C*={C_star}")
    if not gamma > 1:
        raise InvalidInput(f"gamma must exceed 1, got {gamma}")
    if N < 1:
        raise InvalidInput(f"N must be >= 1, got {N}")


def recipe_alphas(c_star: float, C_star: float, gamma: float) -> tuple[float, float, float]:
    alpha3 = 1.05 * max(C_star, 1.0) * gamma
    alpha1 = max(2 * alpha3, alpha3 + 2 * c_star)
    alpha2 = 0.9 * min(alpha1 - alpha3, c_star) / (1 + gamma)
    return alpha1, alpha2, alpha3


def _r0_bounds(b: ConstantBundle) -> dict[str, float]:
    """Upper bounds on r0 from isolating r0 in each r0-dependent inequality."""
    g = b.gamma
    cond1 = min(b.alpha2, b.alpha3 - b.C_star)
    bounds = {
        "TAIL": cond1 / (b.alpha1 + cond1),
        "TC3": b.alpha2 / b.C_star,
        "TC4": (b.c_star / (1 + g) - b.alpha2) / (b.alpha6 + b.C_star),
        "TC5": (b.alpha1 - b.alpha3 - (1 + g) * b.alpha2)
        / ((4 + g) * b.alpha6 + (2 + g) * b.C_star),
    }
    return bounds


def derive_constants(c_star: float, C_star: float, gamma: float, N: int) -> ConstantBundle:
    """Strict bundle: alphas by the fixed recipe, r0 at 0.9 of the tightest bound."""
    _validate_inputs(c_star, C_star, gamma, N)
    alpha1, alpha2, alpha3 = recipe_alphas(c_star, C_star, gamma)
    bundle = ConstantBundle(
        c_star=c_star, C_star=C_star, gamma=gamma, N=N,
        alpha1=alpha1, alpha2=alpha2, alpha3=alpha3,
        alpha6=alpha6_for(C_star, gamma, N),
        r0=0.0, r=0.0, mode="strict",
    )
    r0 = 0.9 * min(_r0_bounds(bundle).values())
    if not math.isfinite(bundle.alpha6) or r0 <= 0:
        raise InvalidInput(
            f"no admissible ratio for N={N}: alpha6={bundle.alpha6:.3g} leaves r0={r0:.3g}"
        )
    bundle.r0 = r0
    bundle.r = r0
    return bundle


def relaxed_bundle(
    c_star: float,
    C_star: float,
    gamma: float,
    N: int,
    r: float,
    alpha1: float | None = None,
    alpha2: float | None = None,
    alpha3: float | None = None,
    alpha6: float | None = None,
) -> ConstantBundle:
    """User-ratio bundle; r stands in for r0 in every derived constant."""
    _validate_inputs(c_star, C_star, gamma, N)
    if not 0 < r < 1:
        raise InvalidInput(f"r must lie in (0,1), got {r}")
    a1, a2, a3 = recipe_alphas(c_star, C_star, gamma)
    return ConstantBundle(
        c_star=c_star, C_star=C_star, gamma=gamma, N=N,
        alpha1=alpha1 if alpha1 is not None else a1,
        alpha2=alpha2 if alpha2 is not None else a2,
        alpha3=alpha3 if alpha3 is not None else a3,
        alpha6=alpha6 if alpha6 is not None else alpha6_for(C_star, gamma, N),
        r0=r, r=r, mode="relaxed",
    )


# ── Feasibility ──────────────────────────────────────────────────


def _cond(name: str, lhs: float, rhs: float) -> Condition:
    return Condition(name=name, lhs=lhs, rhs=rhs, holds=bool(lhs < rhs), slack=rhs - lhs)


def evaluate_conditions(b: ConstantBundle, r: float) -> list[Condition]:
    """Every bundle inequality with r in place of r0."""
    g = b.gamma
    a1, a2, a3, a6 = b.alpha1, b.alpha2, b.alpha3, b.alpha6
    a4 = a1 / (1 - r)
    return [
        _cond("TAIL", r / (1 - r) * a1, min(a2, a3 - b.C_star)),
        _cond("TC1:alpha3<alpha1", a3, a1),
        _cond("TC1:gamma<alpha3", max(b.C_star, 1.0) * g, a3),
        _cond("TC2", (1 + g) * a2, min(a1 - a3, b.c_star)),
        _cond("TC3", r * b.C_star, a2),
        _cond("TC4", (1 + g) * (a2 + a6 * r + b.C_star * r), b.c_star),
        _cond("TC5", (1 + g) * a2 + (4 + g) * a6 * r + (2 + g) * b.C_star * r, a1 - a3),
        _cond("C1>0", 0.0, a2 - a1 * r / (1 - r)),
        _cond("C3>0", 0.0, a3 - b.C_star - a4 * r),
    ]


def check_feasible(bundle: ConstantBundle, r: float) -> list[Condition]:
    """Failing inequalities at ratio r; empty means every inequality holds."""
    if not 0 < r < 1:
        raise InvalidInput(f"r must lie in (0,1), got {r}")
    return [c for c in evaluate_conditions(bundle, r) if not c.holds]
