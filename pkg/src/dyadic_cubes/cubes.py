"""Cube sets K, O, Q built from a parent map, and the D1-D5 checks.

Sets are stored per level as boolean matrices (nodes x points of the space):
row n - 1 of ``K[k]`` is the point set K_{k,n}. Closures use the tolerance
``closure_tol``: closure(A) = {x : d(x, A) <= closure_tol}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import sparse

from dyadic_cubes.constants import (
    D5_PAIR_BUDGET,
    DEFAULT_CHAIN_FACTOR,
    DEFAULT_CLOSURE_FACTOR,
    PAIR_EXHAUSTIVE_LIMIT,
)
from dyadic_cubes.core.errors import BallBoundViolated, InvalidInput, NoChain
from dyadic_cubes.nets import NetHierarchy, NodeId
from dyadic_cubes.parent import ParentMap
from dyadic_cubes.space import PointId
from dyadic_cubes.testing.verifier import Check, Report, build_report, make_check


@dataclass(eq=False)
class CubeSystem:
    pm: ParentMap
    K: dict[int, np.ndarray]
    Q: dict[int, np.ndarray]
    closure_tol: float
    stranded: int = 0
    _closed: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    _neighbors: sparse.csr_matrix | None = field(default=None, repr=False)

    @property
    def hierarchy(self) -> NetHierarchy:
        return self.pm.hierarchy

    @property
    def C1(self) -> float:
        return self.pm.bundle.C1

    @property
    def C2(self) -> float:
        return self.pm.bundle.C2

    @property
    def C3(self) -> float:
        return self.pm.bundle.C3

    @property
    def available(self) -> np.ndarray:
        """Mask of the finest-level net points."""
        mask = np.zeros(self.hierarchy.space.n, dtype=bool)
        mask[self.hierarchy.centers(self.hierarchy.k_max)] = True
        return mask

    def O(self, k: int) -> np.ndarray:
        """O_{k,n} = available points outside every other K at level k."""
        K = self.K[k]
        others = K.sum(axis=0)[None, :] - K
        return self.available[None, :] & (others == 0)

    def K_of(self, node: NodeId) -> np.ndarray:
        return np.flatnonzero(self.K[node.k][node.n - 1])

    def Q_of(self, node: NodeId) -> np.ndarray:
        return np.flatnonzero(self.Q[node.k][node.n - 1])

    def O_of(self, node: NodeId) -> np.ndarray:
        return np.flatnonzero(self.O(node.k)[node.n - 1])

    def neighbor_matrix(self) -> sparse.csr_matrix:
        if self._neighbors is None:
            space = self.hierarchy.space
            lists = space.neighbors_within(self.closure_tol)
            rows = np.concatenate([np.full(len(l), i) for i, l in enumerate(lists)])
            cols = np.concatenate(lists)
            self._neighbors = sparse.csr_matrix(
                (np.ones(rows.size), (rows, cols)), shape=(space.n, space.n)
            )
        return self._neighbors

    def closure(self, mask: np.ndarray) -> np.ndarray:
        """Closure surrogate of one or more point masks (rows)."""
        grown = sparse.csr_matrix(np.atleast_2d(mask), dtype=float) @ self.neighbor_matrix()
        out = grown.toarray() > 0
        return out if np.ndim(mask) == 2 else out[0]

    def closed_K(self, k: int) -> np.ndarray:
        if k not in self._closed:
            self._closed[k] = self.closure(self.K[k])
        return self._closed[k]

    def intersection_graph(self, k: int) -> np.ndarray:
        """Adjacency of level k: closures of K_w and K_v meet, w != v."""
        ck = sparse.csr_matrix(self.closed_K(k), dtype=float)
        adj = (ck @ ck.T).toarray() > 0
        np.fill_diagonal(adj, False)
        return adj

    def to_dict(self) -> dict[str, Any]:
        h = self.hierarchy
        nodes = []
        for k in h.window:
            for node in h.nodes(k):
                par = self.pm.parent.get(node)
                cls = self.pm.classes.get(node)
                nodes.append({
                    "k": k,
                    "n": node.n,
                    "parent": par.n if par else None,
                    "class": cls.tag if cls else None,
                    "Q": self.Q_of(node).tolist(),
                    "K": self.K_of(node).tolist(),
                })
        return {"closure_tol": self.closure_tol, "stranded": self.stranded, "nodes": nodes}

    @classmethod
    def from_dict(cls, raw: dict[str, Any], pm: ParentMap) -> CubeSystem:
        h = pm.hierarchy
        n_points = h.space.n
        K = {k: np.zeros((h.size(k), n_points), dtype=bool) for k in h.window}
        Q = {k: np.zeros((h.size(k), n_points), dtype=bool) for k in h.window}
        for rec in raw["nodes"]:
            k, n = rec["k"], rec["n"]
            if k not in K or not 1 <= n <= h.size(k):
                raise InvalidInput(f"cube record ({k},{n}) outside the hierarchy")
            K[k][n - 1, rec["K"]] = True
            Q[k][n - 1, rec["Q"]] = True
        return cls(pm=pm, K=K, Q=Q, closure_tol=raw["closure_tol"], stranded=raw.get("stranded", 0))


# ── Construction ─────────────────────────────────────────────────


def build_K(pm: ParentMap) -> dict[int, np.ndarray]:
    """Descendant-center sets, bottom-up. Strict bundles enforce the ball bounds."""
    h = pm.hierarchy
    space = h.space
    K: dict[int, np.ndarray] = {}
    for k in range(h.k_max, h.k_min - 1, -1):
        own = np.zeros((h.size(k), space.n), dtype=bool)
        own[np.arange(h.size(k)), h.centers(k)] = True
        if k < h.k_max:
            c = sparse.csr_matrix(pm.child_matrix(k).T)
            own |= (c @ sparse.csr_matrix(K[k + 1], dtype=float)).toarray() > 0
        K[k] = own

    if pm.bundle.mode == "strict":
        _check_ball_bounds(pm, K)
    return K


def _check_ball_bounds(pm: ParentMap, K: dict[int, np.ndarray]) -> None:
    h = pm.hierarchy
    b = pm.bundle
    finest = np.zeros(h.space.n, dtype=bool)
    finest[h.centers(h.k_max)] = True
    for k in h.window:
        for i, center in enumerate(h.centers(k)):
            row = h.space.row(int(center))
            outer = b.alpha4 * h.scale(k)
            out = np.flatnonzero(K[k][i] & (row > outer))
            if out.size:
                p = int(out[0])
                raise BallBoundViolated((k, i + 1), p, float(row[p]), outer)
            inner = b.alpha5 * h.scale(k)
            miss = np.flatnonzero(finest & (row < inner) & ~K[k][i])
            if miss.size:
                p = int(miss[0])
                raise BallBoundViolated((k, i + 1), p, float(row[p]), inner)


def _sibling_rule(pm: ParentMap, K: dict[int, np.ndarray]) -> tuple[dict[int, np.ndarray], int]:
    h = pm.hierarchy
    space = h.space
    Q: dict[int, np.ndarray] = {}

    top = np.zeros_like(K[h.k_min])
    taken = np.zeros(space.n, dtype=bool)
    for n in range(h.size(h.k_min)):
        top[n] = K[h.k_min][n] & ~taken
        taken |= top[n]
    Q[h.k_min] = top

    stranded = 0
    for k in range(h.k_min, h.k_max):
        owners = pm.parent_ordinals(k) - 1
        level = np.zeros_like(K[k + 1])
        taken = np.zeros(space.n, dtype=bool)
        for m, p in enumerate(owners):
            level[m] = Q[k][p] & K[k + 1][m] & ~taken
            taken |= level[m]

        children_of = [np.flatnonzero(owners == p) for p in range(h.size(k))]
        centers = h.centers(k + 1)
        for p in range(h.size(k)):
            left = np.flatnonzero(Q[k][p] & ~taken)
            if left.size == 0 or children_of[p].size == 0:
                continue
            stranded += int(left.size)
            dist = space.pairwise(left, centers[children_of[p]])
            pick = children_of[p][np.argmin(dist, axis=1)]
            level[pick, left] = True
        Q[k + 1] = level
    return Q, stranded


def build_Q(pm: ParentMap, K: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    """Disjoint cubes: top level in n-order, then the sibling rule level by level."""
    return _sibling_rule(pm, K)[0]


def build_cubes(pm: ParentMap, closure_factor: float = DEFAULT_CLOSURE_FACTOR) -> CubeSystem:
    if closure_factor < 0:
        raise InvalidInput(f"closure_factor must be >= 0, got {closure_factor}")
    K = build_K(pm)
    Q, stranded = _sibling_rule(pm, K)
    return CubeSystem(
        pm=pm, K=K, Q=Q,
        closure_tol=closure_factor * pm.hierarchy.space.resolution,
        stranded=stranded,
    )


# ── Chains ───────────────────────────────────────────────────────


def _chain(cs: CubeSystem, adj: np.ndarray, y: int, z: int, k: int) -> tuple[int, int, int] | None:
    ck = cs.closed_K(k)
    ys = np.flatnonzero(ck[:, y])
    zs = ck[:, z]
    for w0 in ys:
        if zs[w0]:
            return int(w0), int(w0), int(w0)
    for w0 in ys:
        step = np.flatnonzero(adj[w0])
        hit = step[zs[step]]
        if hit.size:
            return int(w0), int(hit[0]), int(hit[0])
    for w0 in ys:
        for w1 in np.flatnonzero(adj[w0]):
            hit = np.flatnonzero(adj[w1] & zs)
            if hit.size:
                return int(w0), int(w1), int(hit[0])
    return None


def chain_between(cs: CubeSystem, y: PointId, z: PointId, k: int) -> tuple[NodeId, NodeId, NodeId]:
    """Cubes w0, w1, w2 at level k with y in K_w0, z in K_w2 and consecutive closures meeting."""
    h = cs.hierarchy
    if k not in h.levels:
        raise InvalidInput(f"level {k} outside window [{h.k_min}, {h.k_max}]")
    found = _chain(cs, cs.intersection_graph(k), y, z, k)
    if found is None:
        space = h.space
        ck = cs.closed_K(k)
        miss = None
        near = np.flatnonzero(ck[:, y])
        if near.size:
            reach = ck[near].any(axis=0)
            miss = float(space.row(z)[reach].min()) if reach.any() else None
        raise NoChain(y, z, k, space.d(y, z), nearest_miss=miss)
    return tuple(NodeId(k, w + 1) for w in found)


# ── Verification ─────────────────────────────────────────────────


def _d5_pairs(cs: CubeSystem, k: int, radius: float, budget: int,
              rng: np.random.Generator) -> np.ndarray:
    """All pairs within ``radius`` when they fit the budget, else a seeded sample."""
    space = cs.hierarchy.space
    pts = np.flatnonzero(cs.available)
    if pts.size <= PAIR_EXHAUSTIVE_LIMIT:
        i, j = np.nonzero(np.triu(space.pairwise(pts, pts) <= radius))
        if i.size <= budget:
            return np.column_stack([pts[i], pts[j]])
    out = []
    for y in rng.choice(pts, size=budget):
        near = pts[space.pairwise([y], pts)[0] <= radius]
        out.append((int(y), int(rng.choice(near))))
    return np.array(out, dtype=int).reshape(-1, 2)


def verify_D(
    cs: CubeSystem,
    budget: int = D5_PAIR_BUDGET,
    seed: int = 0,
    chain_factor: float = DEFAULT_CHAIN_FACTOR,
) -> Report:
    h = cs.hierarchy
    b = cs.pm.bundle
    space = h.space
    avail = cs.available
    d1: list[dict[str, Any]] = []
    d2: list[dict[str, Any]] = []
    d3: list[dict[str, Any]] = []
    d4: list[dict[str, Any]] = []
    d5: list[dict[str, Any]] = []
    refine: list[dict[str, Any]] = []
    k_union: list[dict[str, Any]] = []
    p1: list[dict[str, Any]] = []
    p2: list[dict[str, Any]] = []
    touch: list[dict[str, Any]] = []

    # D1
    for k in h.window:
        counts = cs.Q[k].sum(axis=0)
        for p in np.flatnonzero(avail & (counts == 0)):
            d1.append({"k": k, "point": int(p), "issue": "uncovered"})
        for p in np.flatnonzero(counts > 1):
            d1.append({"k": k, "point": int(p), "issue": "overlap",
                       "nodes": (np.flatnonzero(cs.Q[k][:, p]) + 1).tolist()})

    # D2 surrogate
    for k in h.window:
        O = cs.O(k)
        for i in range(h.size(k)):
            node = [k, i + 1]
            if (O[i] & ~cs.Q[k][i]).any():
                d2.append({"node": node, "issue": "O not inside Q"})
            if (cs.Q[k][i] & ~cs.K[k][i]).any():
                d2.append({"node": node, "issue": "Q not inside K"})
            if not O[i].any():
                d2.append({"node": node, "issue": "empty interior"})

    # D3
    q_sparse = {k: sparse.csr_matrix(cs.Q[k], dtype=float) for k in h.window}
    sizes = {k: cs.Q[k].sum(axis=1) for k in h.window}
    for k in h.window:
        for l in range(k + 1, h.k_max + 1):
            inter = (q_sparse[l] @ q_sparse[k].T).toarray()
            for m in range(h.size(l)):
                hits = np.flatnonzero(inter[m])
                if hits.size > 1 or (hits.size == 1 and inter[m, hits[0]] != sizes[l][m]):
                    d3.append({"fine": [l, m + 1], "coarse": [k, (hits + 1).tolist()]})

    # D4
    use_bundle = b.C1 > 0
    c1_emp = np.inf
    c2_emp = 0.0
    for k in h.window:
        s = h.scale(k)
        for i, center in enumerate(h.centers(k)):
            row = space.row(int(center))
            q = cs.Q[k][i]
            outside = avail & ~q
            inner = float(row[outside].min()) / s if outside.any() else np.inf
            outer = float(row[q].max()) / s if q.any() else 0.0
            c1_emp = min(c1_emp, inner)
            c2_emp = max(c2_emp, outer)
            if use_bundle:
                if inner < b.C1:
                    d4.append({"node": [k, i + 1], "issue": "inner ball", "ratio": inner})
                if outer >= b.C2:
                    d4.append({"node": [k, i + 1], "issue": "outer ball", "ratio": outer})
            elif inner <= 0:
                d4.append({"node": [k, i + 1], "issue": "center outside its cube"})

    # D5
    c3 = b.C3 if b.C3 > 0 else chain_factor * b.c_star
    rng = np.random.default_rng(seed)
    tested = {}
    for k in h.window:
        adj = cs.intersection_graph(k)
        pairs = _d5_pairs(cs, k, c3 * h.scale(k), budget, rng)
        tested[str(k)] = int(len(pairs))
        for y, z in pairs:
            if _chain(cs, adj, int(y), int(z), k) is None:
                d5.append({"k": k, "y": int(y), "z": int(z), "distance": space.d(int(y), int(z))})

    # Surrogates
    for k in range(h.k_min, h.k_max):
        owners = cs.pm.parent_ordinals(k) - 1
        for m, p in enumerate(owners):
            if (cs.Q[k + 1][m] & ~cs.Q[k][p]).any():
                refine.append({"child": [k + 1, m + 1], "parent": [k, int(p) + 1]})
        for p in range(h.size(k)):
            kids = np.flatnonzero(owners == p)
            union = cs.K[k + 1][kids].any(axis=0) if kids.size else np.zeros(space.n, dtype=bool)
            if (union & ~cs.K[k][p]).any() or (cs.K[k][p] & ~cs.closure(union)).any():
                p1.append({"node": [k, p + 1]})
            for m in kids:
                if (cs.K[k + 1][m] & ~cs.K[k][p]).any():
                    p2.append({"child": [k + 1, int(m) + 1], "issue": "K grows"})
    for i in range(h.size(h.k_max)):
        if cs.K[h.k_max][i].sum() != 1:
            p2.append({"leaf": [h.k_max, i + 1], "issue": "leaf K is not a singleton"})

    for k in h.window:
        below = np.zeros(space.n, dtype=bool)
        for l in range(k, h.k_max + 1):
            below[h.centers(l)] = True
        if not np.array_equal(cs.K[k].any(axis=0), below):
            k_union.append({"k": k})

    if b.mode == "strict":
        for k in h.window:
            balls = space.ball_matrix(h.centers(k), b.alpha3 * h.scale(k))
            meet = (balls @ balls.T).toarray() > 0
            adj = cs.intersection_graph(k)
            for n, o in np.argwhere(np.triu(meet & ~adj, k=1)):
                touch.append({"k": k, "nodes": [int(n) + 1, int(o) + 1]})

    checks: list[Check] = [
        make_check("D1", d1, "Every level partitions the available points",
                   "Level cover or disjointness broken"),
        make_check("D2", d2, "Interiors nonempty and O in Q in K", "Interior surrogate broken",
                   stranded=cs.stranded),
        make_check("D3", d3, "Cubes nest or are disjoint across levels", "Partially overlapping cubes"),
        make_check("D4", d4, "Cubes sandwiched between balls", "Ball bounds broken",
                   constants="bundle" if use_bundle else "empirical",
                   C1=b.C1 if use_bundle else c1_emp, C2=b.C2 if use_bundle else c2_emp),
        make_check("D5", d5, "Close pairs joined by three cubes", "Close pairs without a chain",
                   C3=c3, pairs=tested),
        make_check("refinement", refine, "Each cube inside its parent cube", "Cubes leak out of their parent"),
        make_check("K_union", k_union, "Level K sets cover the finer net points",
                   "Level K union differs from finer net points"),
        make_check("P1", p1, "Parent K is the closure of its children's K", "Parent K differs from children"),
        make_check("P2", p2, "K shrinks to singletons along every path", "K does not shrink"),
    ]
    if b.mode == "strict":
        checks.append(make_check("ball_touch", touch, "Touching alpha3 balls give touching K",
                                 "Touching balls with disjoint K"))
    certificates = {
        "C1": b.C1 if use_bundle else c1_emp,
        "C2": b.C2 if use_bundle else c2_emp,
        "C3": c3,
        "stranded": cs.stranded,
    }
    return build_report("D", checks, certificates=certificates)
