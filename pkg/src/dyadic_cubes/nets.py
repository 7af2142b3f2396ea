"""Scale-indexed nets with separation (d >= c* r^k) and covering (d < C* r^k)."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

from dyadic_cubes.core.errors import InvalidInput, SeedsTooClose, WindowEmpty
from dyadic_cubes.space import MetricSpace
from dyadic_cubes.testing.verifier import Check, Report, build_report, make_check


class NodeId(NamedTuple):
    """Node (k, n): scale k, ordinal n >= 1 within the scale."""

    k: int
    n: int


@dataclass(eq=False)
class NetHierarchy:
    """Per-scale nets sharing a base point."""

    space: MetricSpace
    r: float
    c_star: float
    C_star: float
    k_min: int
    k_max: int
    base: int
    levels: dict[int, list[int]] = field(default_factory=dict)
    nested: bool = False

    @property
    def window(self) -> range:
        return range(self.k_min, self.k_max + 1)

    def size(self, k: int) -> int:
        return len(self.levels[k])

    def nodes(self, k: int) -> list[NodeId]:
        return [NodeId(k, i + 1) for i in range(len(self.levels[k]))]

    def all_nodes(self) -> list[NodeId]:
        return [node for k in self.window for node in self.nodes(k)]

    def point(self, node: NodeId) -> int:
        return self.levels[node.k][node.n - 1]

    def centers(self, k: int) -> np.ndarray:
        return np.asarray(self.levels[k], dtype=int)

    def scale(self, k: int) -> float:
        return self.r**k

    def to_dict(self) -> dict[str, Any]:
        return {
            "r": self.r,
            "c_star": self.c_star,
            "C_star": self.C_star,
            "window": [self.k_min, self.k_max],
            "base": self.base,
            "nested": self.nested,
            "levels": {str(k): [[i + 1, p] for i, p in enumerate(self.levels[k])] for k in self.window},
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any], space: MetricSpace) -> NetHierarchy:
        k_min, k_max = raw["window"]
        levels: dict[int, list[int]] = {}
        for key, rows in raw["levels"].items():
            ordinals = [n for n, _ in rows]
            if ordinals != list(range(1, len(rows) + 1)):
                raise InvalidInput(f"level {key}: ordinals are not 1..{len(rows)}")
            points = [int(p) for _, p in rows]
            if any(not 0 <= p < space.n for p in points):
                raise InvalidInput(f"level {key} names a point outside 0..{space.n - 1}")
            levels[int(key)] = points
        if sorted(levels) != list(range(k_min, k_max + 1)):
            raise InvalidInput(f"levels {sorted(levels)} do not match window [{k_min}, {k_max}]")
        return cls(
            space=space,
            r=raw["r"],
            c_star=raw["c_star"],
            C_star=raw["C_star"],
            k_min=k_min,
            k_max=k_max,
            base=raw["base"],
            levels=levels,
            nested=raw.get("nested", False),
        )


# ── Construction ─────────────────────────────────────────────────


def build_net(
    space: MetricSpace,
    seeds: list[int],
    separation: float,
    covering: float,
) -> list[int]:
    """Extend ``seeds`` greedily (index order) to a separated, covering point list."""
    if separation <= 0:
        raise InvalidInput("separation must be positive")
    if covering < separation:
        raise InvalidInput(f"covering {covering} must be >= separation {separation}")
    seeds = list(dict.fromkeys(int(s) for s in seeds))
    if len(seeds) > 1:
        sub = space.pairwise(seeds, seeds)
        np.fill_diagonal(sub, np.inf)
        hit = np.argwhere(sub < separation)
        if hit.size:
            i, j = hit[0]
            raise SeedsTooClose(seeds[i], seeds[j], float(sub[i, j]), separation)

    chosen = list(seeds)
    nearest = np.full(space.n, np.inf)
    for s in seeds:
        nearest = np.minimum(nearest, space.row(s))
    for p in range(space.n):
        if nearest[p] >= separation:
            chosen.append(p)
            nearest = np.minimum(nearest, space.row(p))
    return chosen


def default_window(
    space: MetricSpace,
    r: float,
    c_star: float,
    base: int = 0,
) -> tuple[int, int]:
    """Coarsest k with a single node, finest k whose net exhausts the space."""
    ecc = space.eccentricity(base)
    if ecc == 0:
        return 0, 0
    log_r = math.log(r)
    # c* r^k > ecc  <=>  k < log(ecc / c*) / log r  (log r < 0 flips the sign)
    k_min = math.ceil(math.log(ecc / c_star) / log_r) - 1
    while c_star * r**k_min <= ecc:
        k_min -= 1
    k_max = math.ceil(math.log(space.resolution / c_star) / log_r)
    while c_star * r**k_max > space.resolution:
        k_max += 1
    return k_min, max(k_min, k_max)


def build_hierarchy(
    space: MetricSpace,
    r: float,
    c_star: float,
    C_star: float,
    k_min: int,
    k_max: int,
    base: int = 0,
    nested: bool = False,
) -> NetHierarchy:
    """Build one net per scale in [k_min, k_max], every level seeded with ``base``.

    With ``nested=True`` level k+1 is seeded with the whole level-k net, which
    keeps ordinals stable across scales.
    """
    if not 0 < c_star < C_star:
        raise InvalidInput(f"need 0 < c* < C*, got c*={c_star}, C*={C_star}")
    if not 0 < r < 1:
        raise InvalidInput(f"r must lie in (0,1), got {r}")
    if k_min > k_max:
        raise WindowEmpty(f"window [{k_min}, {k_max}] is empty")
    if not 0 <= base < space.n:
        raise InvalidInput(f"base point {base} outside 0..{space.n - 1}")

    if space.n > 1 and c_star * r**k_max < space.resolution:
        warnings.warn(
            f"window reaches k={k_max} where c*r^k={c_star * r**k_max:.3g} is below "
            f"resolution {space.resolution:.3g}; the net there is the whole space",
            stacklevel=2,
        )

    levels: dict[int, list[int]] = {}
    seeds = [base]
    for k in range(k_min, k_max + 1):
        sep = c_star * r**k
        levels[k] = build_net(space, seeds, sep, C_star * r**k)
        if nested:
            seeds = levels[k]

    if len(levels[k_max]) < space.n:
        warnings.warn(
            f"finest level k={k_max} holds {len(levels[k_max])} of {space.n} points; "
            "cube checks treat the rest through their nearest net point",
            stacklevel=2,
        )
    return NetHierarchy(
        space=space,
        r=r,
        c_star=c_star,
        C_star=C_star,
        k_min=k_min,
        k_max=k_max,
        base=base,
        levels=levels,
        nested=nested,
    )


# ── Verification ─────────────────────────────────────────────────


def verify_net(h: NetHierarchy) -> Report:
    """Exhaustive separation and covering checks at every level."""
    sep_violations: list[dict[str, Any]] = []
    cov_violations: list[dict[str, Any]] = []
    base_missing: list[int] = []

    for k in h.window:
        centers = h.centers(k)
        sep = h.c_star * h.scale(k)
        cov = h.C_star * h.scale(k)
        sub = h.space.pairwise(centers, centers)
        np.fill_diagonal(sub, np.inf)
        for i, j in np.argwhere(np.triu(sub < sep, k=1)):
            sep_violations.append({
                "k": k, "nodes": [int(i) + 1, int(j) + 1],
                "points": [int(centers[i]), int(centers[j])], "distance": float(sub[i, j]),
            })
        nearest = h.space.distance_to_set(centers)
        for p in np.flatnonzero(nearest >= cov):
            cov_violations.append({"k": k, "point": int(p), "distance": float(nearest[p])})
        if h.base not in set(centers.tolist()):
            base_missing.append(k)

    checks: list[Check] = [
        make_check("separation", sep_violations, "All levels separated",
                   "Net points closer than c*r^k"),
        make_check("covering", cov_violations, "All levels cover the space",
                   "Points at distance >= C*r^k from every net point"),
        make_check("base_point", base_missing, "Base point present at every level",
                   "Base point missing"),
    ]
    sizes = {str(k): h.size(k) for k in h.window}
    return build_report("net", checks, certificates={"level_sizes": sizes})
