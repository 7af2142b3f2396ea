"""Tree with a reference point, scale sections and the quasi-metric delta_M.

The partition attached to the tree is K_w := closure(Q_w) with g(w) = diam Q_w.
Nodes whose Q_w has fewer than two points never enter a scale section.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable

import networkx as nx
import numpy as np
from scipy import sparse

from dyadic_cubes.constants import DEFAULT_PAIR_BUDGET, DEFAULT_W_BUDGET
from dyadic_cubes.core.errors import InvalidInput, NoSingletonRoot
from dyadic_cubes.cubes import CubeSystem
from dyadic_cubes.nets import NodeId
from dyadic_cubes.testing.verifier import Check, Report, build_report, make_check


def _set_diameter(space, pts: np.ndarray, chunk: int = 1024) -> float:
    if pts.size < 2:
        return 0.0
    best = 0.0
    for start in range(0, pts.size, chunk):
        best = max(best, float(space.pairwise(pts[start : start + chunk], pts).max()))
    return best


# ── Tree ─────────────────────────────────────────────────────────


@dataclass(eq=False)
class RefTree:
    """Rooted tree over the cube nodes; the root phi is its own parent."""

    cs: CubeSystem
    phi: NodeId
    parent: dict[NodeId, NodeId]
    nodes: list[NodeId]
    _children: dict[NodeId, list[NodeId]] = field(default_factory=dict, repr=False)
    _g: dict[NodeId, float] = field(default_factory=dict, repr=False)
    _partition: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    _graphs: dict[int, LevelGraph] = field(default_factory=dict, repr=False)
    _ladder: list[ScaleSection] | None = field(default=None, repr=False)

    def __post_init__(self):
        for w in self.nodes:
            if w != self.phi:
                self._children.setdefault(self.parent[w], []).append(w)

    @property
    def depth(self) -> int:
        return self.cs.hierarchy.k_max - self.phi.k

    def level(self, w: NodeId) -> int:
        return w.k - self.phi.k

    def pi(self, w: NodeId) -> NodeId:
        return self.parent[w]

    def ancestor(self, w: NodeId, steps: int) -> NodeId:
        for _ in range(steps):
            w = self.parent[w]
        return w

    def children(self, w: NodeId) -> list[NodeId]:
        return self._children.get(w, [])

    def at_level(self, level: int) -> list[NodeId]:
        k = self.phi.k + level
        if k not in self.cs.hierarchy.levels:
            return []
        return self.cs.hierarchy.nodes(k)

    def periodic_points(self) -> set[NodeId]:
        return {w for w in self.nodes if self.parent[w] == w}

    def q_size(self, w: NodeId) -> int:
        return int(self.cs.Q[w.k][w.n - 1].sum())

    def eligible(self, w: NodeId) -> bool:
        return self.q_size(w) >= 2

    def g(self, w: NodeId) -> float:
        if w not in self._g:
            self._g[w] = diam_g(self.cs, w)
        return self._g[w]

    def partition(self, k: int) -> np.ndarray:
        """Rows are the sets K_w = closure(Q_w) of level k."""
        if k not in self._partition:
            self._partition[k] = self.cs.closure(self.cs.Q[k])
        return self._partition[k]

    def member(self, w: NodeId) -> np.ndarray:
        return self.partition(w.k)[w.n - 1]


def to_tree(cs: CubeSystem) -> RefTree:
    """Tree rooted at the finest single-node level of the coarse end of the window."""
    h = cs.hierarchy
    if h.size(h.k_min) != 1:
        raise NoSingletonRoot(h.k_min, h.size(h.k_min))
    k0 = h.k_min
    while k0 + 1 <= h.k_max and h.size(k0 + 1) == 1:
        k0 += 1
    phi = NodeId(k0, 1)
    nodes = [w for k in range(k0, h.k_max + 1) for w in h.nodes(k)]
    parent = {w: cs.pm.parent[w] for w in nodes if w.k > k0}
    parent[phi] = phi
    tree = RefTree(cs=cs, phi=phi, parent=parent, nodes=nodes)

    if tree.periodic_points() != {phi}:
        raise InvalidInput(f"tree has periodic points {sorted(tree.periodic_points())}")
    for w in nodes:
        if tree.ancestor(w, tree.level(w)) != phi:
            raise InvalidInput(f"node {tuple(w)} has no common ancestor with the root")
    return tree


def tree_distance_b(tree: RefTree, w: NodeId, v: NodeId) -> tuple[int, int]:
    """(b(w,v), b(v,w)): steps from w and from v to their first common ancestor."""
    path_v = [v]
    while path_v[-1] != tree.phi:
        path_v.append(tree.pi(path_v[-1]))
    index_v = {u: i for i, u in enumerate(path_v)}
    steps = 0
    u = w
    while u not in index_v:
        u = tree.pi(u)
        steps += 1
    return steps, index_v[u]


def diam_g(cs: CubeSystem, w: NodeId) -> float:
    """g(w) = diam Q_w."""
    return _set_diameter(cs.hierarchy.space, cs.Q_of(w))


# ── Graphs and sections ──────────────────────────────────────────


def _touching(sets: np.ndarray) -> sparse.csr_matrix:
    m = sparse.csr_matrix(sets, dtype=float)
    adj = (m @ m.T).tocsr()
    adj.setdiag(0)
    adj.eliminate_zeros()
    adj.data[:] = 1.0
    return adj


@dataclass(eq=False)
class LevelGraph:
    """Nodes of one tree level, joined when their partition sets meet."""

    k: int
    nodes: list[NodeId]
    adjacency: sparse.csr_matrix

    def index(self, w: NodeId) -> int:
        return w.n - 1

    def hops_from(self, w: NodeId) -> np.ndarray:
        graph = self.to_networkx()
        lengths = nx.single_source_shortest_path_length(graph, w)
        return np.array([lengths.get(u, np.inf) for u in self.nodes], dtype=float)

    def to_networkx(self, g: dict[NodeId, float] | None = None) -> nx.Graph:
        graph = nx.Graph()
        for u in self.nodes:
            graph.add_node(u, k=u.k, n=u.n, **({"g": g[u]} if g else {}))
        rows, cols = sparse.triu(self.adjacency, k=1).nonzero()
        graph.add_edges_from((self.nodes[i], self.nodes[j]) for i, j in zip(rows, cols))
        return graph


def level_graph(tree: RefTree, cs: CubeSystem, level: int) -> LevelGraph:
    nodes = tree.at_level(level)
    if not nodes:
        raise InvalidInput(f"level {level} is outside the tree (depth {tree.depth})")
    k = nodes[0].k
    if k not in tree._graphs:
        tree._graphs[k] = LevelGraph(k=k, nodes=nodes, adjacency=_touching(tree.partition(k)))
    return tree._graphs[k]


@dataclass(eq=False)
class ScaleSection:
    s: float
    nodes: list[NodeId]
    adjacency: sparse.csr_matrix
    members: np.ndarray  # nodes x points, closure(Q_w) rows

    @property
    def edges(self) -> list[tuple[NodeId, NodeId]]:
        rows, cols = sparse.triu(self.adjacency, k=1).nonzero()
        return [(self.nodes[i], self.nodes[j]) for i, j in zip(rows, cols)]

    def max_degree(self) -> int:
        if not self.nodes:
            return 0
        return int(np.asarray(self.adjacency.sum(axis=1)).max())


def _section_nodes(tree: RefTree, s: float) -> list[NodeId]:
    g_root = tree.g(tree.phi)
    if s > g_root:
        return []
    out = []
    for w in tree.nodes:
        if not tree.eligible(w):
            continue
        upper = math.inf if w == tree.phi else tree.g(tree.pi(w))
        if tree.g(w) <= s < upper:
            out.append(w)
    return out


def scale_section(tree: RefTree, cs: CubeSystem, s: float) -> ScaleSection:
    """Lambda_s = {w : g(w) <= s < g(pi(w))} with edges where partition sets meet."""
    if not s > 0:
        raise InvalidInput(f"scale must be positive, got {s}")
    nodes = _section_nodes(tree, s)
    n_points = cs.hierarchy.space.n
    members = np.array([tree.member(w) for w in nodes], dtype=bool).reshape(len(nodes), n_points)
    return ScaleSection(s=s, nodes=nodes, adjacency=_touching(members), members=members)


def breakpoints(tree: RefTree) -> list[float]:
    """Distinct positive g values in increasing order."""
    return sorted({tree.g(w) for w in tree.nodes if tree.eligible(w) and tree.g(w) > 0})


def section_ladder(tree: RefTree) -> list[ScaleSection]:
    """One section per breakpoint; sections are constant between breakpoints."""
    if tree._ladder is None:
        tree._ladder = [scale_section(tree, tree.cs, s) for s in breakpoints(tree)]
    return tree._ladder


# ── delta_M ──────────────────────────────────────────────────────


def delta_matrix(
    tree: RefTree,
    cs: CubeSystem,
    points: Iterable[int],
    M: int,
    others: Iterable[int] | None = None,
) -> np.ndarray:
    """delta_M between ``points`` (rows) and ``others`` (columns, default ``points``)."""
    if M < 1:
        raise InvalidInput(f"M must be >= 1, got {M}")
    rows = np.asarray(list(points), dtype=int)
    cols = rows if others is None else np.asarray(list(others), dtype=int)
    out = np.full((rows.size, cols.size), np.inf)
    out[rows[:, None] == cols[None, :]] = 0.0
    pending = ~np.isfinite(out)

    for section in section_ladder(tree):
        if not pending.any():
            break
        if not section.nodes:
            continue
        a = sparse.csr_matrix(section.members[:, rows].T, dtype=float)
        b = sparse.csr_matrix(section.members[:, cols].T, dtype=float)
        step = section.adjacency + sparse.identity(len(section.nodes), format="csr")
        reach = a
        for _ in range(M):
            reach = reach @ step
            reach.data[:] = 1.0
        linked = (reach @ b.T).toarray() > 0
        hit = pending & linked
        out[hit] = section.s
        pending &= ~hit
    return out


def delta_M(tree: RefTree, cs: CubeSystem, x: int, y: int, M: int) -> float:
    """Smallest scale whose section links a set holding x to one holding y within M hops."""
    if x == y:
        return 0.0
    return float(delta_matrix(tree, cs, [x], M, others=[y])[0, 0])


# ── Basic framework ──────────────────────────────────────────────


def _sample_points(cs: CubeSystem, budget: int, seed: int) -> np.ndarray:
    pts = np.flatnonzero(cs.available)
    size = min(pts.size, int(math.ceil(math.sqrt(2 * budget))) + 1)
    if size >= pts.size:
        return pts
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(pts, size=size, replace=False))


def _b1_ratio(tree: RefTree, cs: CubeSystem, M: int, budget: int, seed: int) -> tuple[float, list[dict]]:
    pts = _sample_points(cs, budget, seed)
    if pts.size < 2:
        return 1.0, []
    delta = delta_matrix(tree, cs, pts, M)
    dist = cs.hierarchy.space.pairwise(pts, pts)
    iu, ju = np.triu_indices(pts.size, k=1)
    d = dist[iu, ju]
    dm = delta[iu, ju]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.maximum(dm / d, np.where(dm > 0, d / dm, np.inf))
    bad = np.flatnonzero(~np.isfinite(ratio))
    witnesses = [{"x": int(pts[iu[i]]), "y": int(pts[ju[i]]), "d": float(d[i]), "delta": float(dm[i])}
                 for i in bad]
    return float(ratio.max()), witnesses


def adapted_M(
    tree: RefTree,
    cs: CubeSystem,
    candidates: Iterable[int] = (1, 2, 3, 4),
    budget: int = DEFAULT_PAIR_BUDGET,
    seed: int = 0,
) -> tuple[int, float]:
    """Smallest candidate M with a finite sampled B1 ratio, and that ratio."""
    last = (0, math.inf)
    for M in sorted(candidates):
        eta1, _ = _b1_ratio(tree, cs, M, budget, seed)
        last = (M, eta1)
        if math.isfinite(eta1):
            return last
    return last


def verify_basic_framework(
    tree: RefTree,
    cs: CubeSystem,
    M: int,
    budget: int = DEFAULT_PAIR_BUDGET,
    w_budget: int = DEFAULT_W_BUDGET,
    seed: int = 0,
) -> Report:
    h = cs.hierarchy
    space = h.space

    eta1, b1 = _b1_ratio(tree, cs, M, budget, seed)

    # B2 on a seeded node sample, centered at the net point of each node.
    rng = np.random.default_rng(seed)
    candidates = [w for w in tree.nodes if w != tree.phi and tree.eligible(w)]
    if len(candidates) > w_budget:
        picks = np.sort(rng.choice(len(candidates), size=w_budget, replace=False))
        candidates = [candidates[i] for i in picks]
    avail = np.flatnonzero(cs.available)
    b2: list[dict[str, Any]] = []
    eta2 = math.inf
    if candidates:
        centers = [h.point(w) for w in candidates]
        delta1 = delta_matrix(tree, cs, centers, 1, others=avail)
        for row, w in zip(delta1, candidates):
            outside = ~tree.member(w)[avail]
            scale = tree.g(tree.pi(w))
            if not outside.any() or scale == 0:
                continue
            bound = float(row[outside].min()) / scale
            eta2 = min(eta2, bound)
            if bound <= 0:
                b2.append({"node": list(w), "bound": bound})

    ladder = section_ladder(tree)
    degree = max((s.max_degree() for s in ladder), default=0)

    eta3 = 1.0
    for w in tree.nodes:
        gw = tree.g(w)
        if gw <= 0:
            continue
        scale = h.r ** tree.level(w)
        eta3 = max(eta3, gw / scale, scale / gw)

    fan_in = max((len(tree.children(w)) for w in tree.nodes), default=0)

    interior: list[dict[str, Any]] = []
    for k in range(tree.phi.k, h.k_max + 1):
        sets = tree.partition(k)
        cover = sets.sum(axis=0)
        for i in range(h.size(k)):
            w = NodeId(k, i + 1)
            if tree.g(w) <= 2 * cs.closure_tol:
                continue
            own = cs.Q[k][i] & (cover - sets[i] == 0)
            if not own.any():
                interior.append({"node": [k, i + 1]})

    checks: list[Check] = [
        make_check("B1", b1, "delta_M comparable to d on sampled pairs", "Pairs never linked by delta_M",
                   M=M, eta1=eta1),
        make_check("B2", b2, "Cubes thick around their centers", "Cubes without a thick core",
                   eta2=eta2, sampled=len(candidates)),
        make_check("B3", [], "Section degrees bounded", "Unbounded section degree", max_degree=degree),
        make_check("B4", [], "Diameters comparable to r^[w]", "Diameters off scale", eta3=eta3),
        make_check("fan_in", [], "Children per node bounded", "Unbounded fan-in", max_fan_in=fan_in),
        make_check("interior", interior, "Every cube keeps points outside its neighbours",
                   "Cubes covered by their neighbours"),
    ]
    certificates = {
        "M": M,
        "eta1": eta1,
        "eta2": eta2,
        "eta3": eta3,
        "max_section_degree": degree,
        "max_fan_in": fan_in,
        "sections": len(ladder),
    }
    return build_report("B", checks, certificates=certificates)
