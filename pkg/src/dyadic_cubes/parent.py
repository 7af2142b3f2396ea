"""Parent map between consecutive net levels and the T1-T5 checks.

Each level transition k -> k+1 splits the children into three classes:
A (close to a level-k center), B (near a selected far point f(i)) and C (the
rest). B blocks realize every close pair of parents through designated
children, which is what makes neighbouring cubes touch one level down.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Literal

import numpy as np

from dyadic_cubes.certify import ConstantBundle, beta_closed_form
from dyadic_cubes.core.errors import (
    ClassificationError,
    DesignationConflict,
    EmptyAnnulus,
    InvalidInput,
    PairingOverflow,
)
from dyadic_cubes.nets import NetHierarchy, NodeId
from dyadic_cubes.pool import map_ordered
from dyadic_cubes.space import MetricSpace
from dyadic_cubes.testing.verifier import Check, Report, build_report, make_check

Tag = Literal["A", "B", "C"]


@dataclass(frozen=True)
class NodeClass:
    tag: Tag
    block: int | None = None


@dataclass
class LevelClassification:
    """Classes of the level-(k+1) children, indexed by ordinal m - 1."""

    k: int
    classes: list[NodeClass]
    f_list: list[int]
    a_parent: dict[int, int] = field(default_factory=dict)

    def block_members(self, i: int) -> list[int]:
        return [m + 1 for m, c in enumerate(self.classes) if c.tag == "B" and c.block == i]


@dataclass(eq=False)
class ParentMap:
    hierarchy: NetHierarchy
    bundle: ConstantBundle
    parent: dict[NodeId, NodeId]
    classes: dict[NodeId, NodeClass]
    f_list: dict[int, list[int]]
    designated: dict[tuple[int, int, int], int]
    pairs: dict[tuple[int, int], list[tuple[int, int]]]
    flags: dict[NodeId, str] = field(default_factory=dict)

    def __post_init__(self):
        self._children: dict[NodeId, list[NodeId]] = {}
        for child, par in sorted(self.parent.items()):
            self._children.setdefault(par, []).append(child)

    def children(self, node: NodeId) -> list[NodeId]:
        return self._children.get(node, [])

    def ancestor(self, node: NodeId, steps: int) -> NodeId:
        for _ in range(steps):
            if node.k == self.hierarchy.k_min:
                break
            node = self.parent[node]
        return node

    def parent_ordinals(self, k: int) -> np.ndarray:
        """Parent ordinal n (1-based) of every level-(k+1) child, in child order."""
        return np.array([self.parent[c].n for c in self.hierarchy.nodes(k + 1)], dtype=int)

    def child_matrix(self, k: int) -> np.ndarray:
        """0/1 matrix (level-(k+1) children) x (level-k nodes)."""
        owners = self.parent_ordinals(k) - 1
        mat = np.zeros((owners.size, self.hierarchy.size(k)))
        mat[np.arange(owners.size), owners] = 1.0
        return mat

    def fan_in(self, k: int) -> int:
        if k >= self.hierarchy.k_max:
            return 0
        counts = np.bincount(self.parent_ordinals(k), minlength=self.hierarchy.size(k) + 1)
        return int(counts[1:].max()) if counts.size > 1 else 0

    def to_dict(self) -> dict[str, Any]:
        h = self.hierarchy
        levels = {}
        for k in range(h.k_min + 1, h.k_max + 1):
            rows = []
            for node in h.nodes(k):
                cls = self.classes[node]
                rows.append([node.n, self.parent[node].n, cls.tag, cls.block])
            levels[str(k)] = rows
        return {
            "levels": levels,
            "f_list": {str(k): v for k, v in sorted(self.f_list.items())},
            "designated": [[k, i, p, m] for (k, i, p), m in sorted(self.designated.items())],
            "pairs": [[k, i, [list(pq) for pq in v]] for (k, i), v in sorted(self.pairs.items())],
            "flags": [[node.k, node.n, msg] for node, msg in sorted(self.flags.items())],
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any], hierarchy: NetHierarchy, bundle: ConstantBundle) -> ParentMap:
        parent: dict[NodeId, NodeId] = {}
        classes: dict[NodeId, NodeClass] = {}
        for key, rows in raw["levels"].items():
            k = int(key)
            for m, n, tag, block in rows:
                parent[NodeId(k, m)] = NodeId(k - 1, n)
                classes[NodeId(k, m)] = NodeClass(tag, block)
        return cls(
            hierarchy=hierarchy,
            bundle=bundle,
            parent=parent,
            classes=classes,
            f_list={int(k): list(v) for k, v in raw.get("f_list", {}).items()},
            designated={(k, i, p): m for k, i, p, m in raw.get("designated", [])},
            pairs={(k, i): [tuple(pq) for pq in v] for k, i, v in raw.get("pairs", [])},
            flags={NodeId(k, n): msg for k, n, msg in raw.get("flags", [])},
        )


# ── Classification ───────────────────────────────────────────────


def classify_level(h: NetHierarchy, b: ConstantBundle, k: int) -> LevelClassification:
    """Split level k+1 into A, B and C for the transition k -> k+1."""
    if k not in h.levels or k + 1 not in h.levels:
        raise InvalidInput(f"levels {k} and {k + 1} must both exist in the hierarchy")
    space = h.space
    r = h.r
    s = h.scale(k)
    children = h.centers(k + 1)
    dist = space.pairwise(children, h.centers(k))
    nearest = dist.min(axis=1)

    a_radius = b.alpha2 * s
    is_a = nearest < a_radius
    far = nearest >= (b.alpha2 + b.alpha6 * r) * s

    f_list: list[int] = []
    f_points: list[int] = []
    for m in np.flatnonzero(far):
        point = int(children[m])
        if f_points and (space.pairwise([point], f_points)[0] < 2 * b.alpha6 * r * s).any():
            continue
        f_list.append(int(m) + 1)
        f_points.append(point)

    classes = [NodeClass("A") if a else NodeClass("C") for a in is_a]
    if f_points:
        inside = space.pairwise(children, f_points) < b.alpha6 * r * s
        for m in np.flatnonzero(inside.any(axis=1)):
            blocks = np.flatnonzero(inside[m])
            if is_a[m] or blocks.size > 1:
                raise ClassificationError(
                    f"child ({k + 1},{m + 1}) falls in class A and block(s) {(blocks + 1).tolist()}"
                )
            classes[m] = NodeClass("B", int(blocks[0]) + 1)

    a_parent = {}
    for m in np.flatnonzero(is_a):
        row = np.where(dist[m] < a_radius, dist[m], np.inf)
        a_parent[int(m) + 1] = int(np.argmin(row)) + 1
    return LevelClassification(k=k, classes=classes, f_list=f_list, a_parent=a_parent)


def find_annulus_point(space: MetricSpace, center: int, inner: float, outer: float) -> int:
    """Smallest-index z with inner <= d(center, z) < outer."""
    if not inner < outer:
        raise InvalidInput(f"annulus needs inner < outer, got [{inner}, {outer})")
    if inner <= 0:
        return int(center)
    row = space.row(center)
    hits = np.flatnonzero((row >= inner) & (row < outer))
    if hits.size:
        return int(hits[0])
    below = np.flatnonzero(row < inner)
    above = np.flatnonzero(row >= outer)
    raise EmptyAnnulus(
        center,
        inner,
        outer,
        below=int(below[np.argmax(row[below])]) if below.size else None,
        above=int(above[np.argmin(row[above])]) if above.size else None,
    )


# ── Assignment ───────────────────────────────────────────────────


@dataclass
class _Transition:
    k: int
    classification: LevelClassification
    parent: dict[int, int] = field(default_factory=dict)
    designated: dict[tuple[int, int], int] = field(default_factory=dict)
    pairs: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    flags: dict[int, str] = field(default_factory=dict)

    def flag(self, m: int, message: str) -> None:
        self.flags[m] = f"{self.flags[m]}; {message}" if m in self.flags else message


def _cover_index(h: NetHierarchy, k: int, point: int) -> int:
    """Smallest ordinal n with d(point, x_{k,n}) < C* r^k."""
    row = h.space.pairwise([point], h.centers(k))[0]
    hits = np.flatnonzero(row < h.C_star * h.scale(k))
    return int(hits[0]) + 1 if hits.size else int(np.argmin(row)) + 1


def _witness(h: NetHierarchy, b: ConstantBundle, t: _Transition, f_node: int,
             center: int, inner: float, outer: float) -> int:
    try:
        return find_annulus_point(h.space, center, inner, outer)
    except EmptyAnnulus:
        if b.mode == "strict":
            raise
    row = h.space.row(center)
    point = int(np.argmin(np.abs(row - (inner + outer) / 2)))
    warnings.warn(
        f"empty annulus [{inner:.4g}, {outer:.4g}) around point {center}; "
        f"using point {point} nearest the midpoint",
        stacklevel=3,
    )
    t.flag(f_node, "annulus fallback")
    return point


def _pair_block(h: NetHierarchy, b: ConstantBundle, t: _Transition, i: int) -> None:
    k = t.k
    r = h.r
    s = h.scale(k)
    s1 = h.scale(k + 1)
    g = b.gamma
    f_node = t.classification.f_list[i - 1]
    x_f = h.levels[k + 1][f_node - 1]

    dist = h.space.pairwise([x_f], h.centers(k))[0]
    close = (np.flatnonzero(dist < (b.alpha1 - b.alpha6 * r) * s) + 1).tolist()
    block_pairs = list(combinations(close, 2))
    if len(block_pairs) > b.max_pairs:
        raise PairingOverflow(k, i, len(block_pairs), b.max_pairs)
    t.pairs[i] = block_pairs

    for j, (p, q) in enumerate(block_pairs, start=1):
        inner = (beta_closed_form(b.C_star, g, j - 1) + (2 + g) * b.C_star) * s1
        y = _witness(h, b, t, f_node, x_f, inner, g * inner)
        a = _cover_index(h, k + 1, y)
        x_a = h.levels[k + 1][a - 1]
        z = _witness(h, b, t, f_node, x_a, b.C_star * s1, b.C_star * g * s1)
        c = _cover_index(h, k + 1, z)
        for pos, m, n in ((2 * j - 1, a, p), (2 * j, c, q)):
            problem = None
            if t.classification.classes[m - 1].block != i:
                problem = f"designated for pair {j} of block {i} but lies outside the block"
            elif m in t.parent:
                problem = f"designated twice (pair {j} of block {i})"
            if problem:
                if b.mode == "strict":
                    raise DesignationConflict(k, m, problem)
                t.flag(m, problem)
                continue
            t.designated[(i, pos)] = m
            t.parent[m] = n


def _transition(h: NetHierarchy, b: ConstantBundle, k: int) -> _Transition:
    cls = classify_level(h, b, k)
    t = _Transition(k=k, classification=cls)
    t.parent.update(cls.a_parent)
    for i in range(1, len(cls.f_list) + 1):
        _pair_block(h, b, t, i)

    dist = h.space.pairwise(h.centers(k + 1), h.centers(k))
    cover = h.C_star * h.scale(k)
    for m in range(1, h.size(k + 1) + 1):
        if m in t.parent:
            continue
        hits = np.flatnonzero(dist[m - 1] < cover)
        if hits.size:
            t.parent[m] = int(hits[0]) + 1
            continue
        if b.mode == "strict":
            raise InvalidInput(f"child ({k + 1},{m}) is not within C*r^{k} of any level-{k} center")
        t.parent[m] = int(np.argmin(dist[m - 1])) + 1
        t.flag(m, "no covering parent; nearest used")
    return t


def assign_parents(h: NetHierarchy, b: ConstantBundle, workers: int | None = None) -> ParentMap:
    """Parent map for every transition of the window, transitions run on the pool."""
    if not math.isclose(h.r, b.r, rel_tol=1e-12):
        raise InvalidInput(f"hierarchy r={h.r} differs from bundle r={b.r}")
    if not (math.isclose(h.c_star, b.c_star) and math.isclose(h.C_star, b.C_star)):
        raise InvalidInput("hierarchy and bundle disagree on c* / C*")

    transitions = map_ordered(lambda k: _transition(h, b, k), range(h.k_min, h.k_max), workers)

    parent: dict[NodeId, NodeId] = {}
    classes: dict[NodeId, NodeClass] = {}
    f_list: dict[int, list[int]] = {}
    designated: dict[tuple[int, int, int], int] = {}
    pairs: dict[tuple[int, int], list[tuple[int, int]]] = {}
    flags: dict[NodeId, str] = {}
    for t in transitions:
        k1 = t.k + 1
        for m, n in t.parent.items():
            parent[NodeId(k1, m)] = NodeId(t.k, n)
        for m, c in enumerate(t.classification.classes, start=1):
            classes[NodeId(k1, m)] = c
        f_list[k1] = t.classification.f_list
        designated.update({(k1, i, p): m for (i, p), m in t.designated.items()})
        pairs.update({(k1, i): v for i, v in t.pairs.items()})
        flags.update({NodeId(k1, m): msg for m, msg in t.flags.items()})

    return ParentMap(
        hierarchy=h, bundle=b, parent=parent, classes=classes,
        f_list=f_list, designated=designated, pairs=pairs, flags=flags,
    )


# ── Verification ─────────────────────────────────────────────────


def _realized_pairs(pm: ParentMap, k: int) -> np.ndarray:
    """P[n1, n2]: some children of n1 and n2 have intersecting alpha3 r^{k+1} balls."""
    h = pm.hierarchy
    balls = h.space.ball_matrix(h.centers(k + 1), pm.bundle.alpha3 * h.scale(k + 1))
    touch = (balls @ balls.T).toarray() > 0
    c = pm.child_matrix(k)
    return (c.T @ touch.astype(float) @ c) > 0


def verify_T(pm: ParentMap) -> Report:
    """Exhaustive T1-T5 over every transition of the window."""
    h = pm.hierarchy
    b = pm.bundle
    space = h.space
    t1: list[dict[str, Any]] = []
    t2: list[dict[str, Any]] = []
    t3: list[dict[str, Any]] = []
    t4: list[dict[str, Any]] = []
    t5: list[dict[str, Any]] = []
    fan_in: dict[str, int] = {}

    for k in range(h.k_min, h.k_max):
        s = h.scale(k)
        owners = pm.parent_ordinals(k)
        missing = sorted(set(range(1, h.size(k) + 1)) - set(owners.tolist()))
        if missing:
            t1.append({"k": k, "childless": missing[:10]})
        fan_in[str(k)] = pm.fan_in(k)

        dist = space.pairwise(h.centers(k + 1), h.centers(k))
        own = dist[np.arange(owners.size), owners - 1]
        for m in np.flatnonzero(own >= b.alpha1 * s):
            t2.append({"k": k, "child": int(m) + 1, "parent": int(owners[m]), "distance": float(own[m])})
        for m, n in np.argwhere(dist < b.alpha2 * s):
            if owners[m] != n + 1:
                t3.append({"k": k, "child": int(m) + 1, "close_to": int(n) + 1,
                           "parent": int(owners[m]), "distance": float(dist[m, n])})

        realized = _realized_pairs(pm, k)
        balls = space.ball_matrix(h.centers(k), b.alpha3 * s)
        touch = (balls @ balls.T).toarray() > 0
        for n1, n2 in np.argwhere(np.triu(touch & ~realized, k=1)):
            shared = np.flatnonzero(balls[n1].toarray()[0] * balls[n2].toarray()[0])
            t4.append({"k": k, "nodes": [int(n1) + 1, int(n2) + 1], "witness": int(shared[0])})

        for m in np.flatnonzero(own >= b.C_star * s):
            p = owners[m] - 1
            for n in np.flatnonzero(dist[m] < b.alpha3 * s):
                if n != p and not realized[p, n]:
                    t5.append({"k": k, "child": int(m) + 1, "parent": int(p) + 1, "node": int(n) + 1})

    checks: list[Check] = [
        make_check("T1", t1, "Every node has a child", "Childless nodes"),
        make_check("T2", t2, "Children within alpha1 r^k of their parent",
                   "Children too far from their parent"),
        make_check("T3", t3, "alpha2-close children attached to the close node",
                   "alpha2-close children attached elsewhere"),
        make_check("T4", t4, "Touching balls realized one level down",
                   "Touching alpha3 balls without touching children"),
        make_check("T5", t5, "Far children bridged to every alpha3-close node",
                   "Far children without a bridge"),
    ]
    certificates = {"max_fan_in": fan_in, "flags": len(pm.flags), "mode": b.mode}
    return build_report("T", checks, certificates=certificates)
