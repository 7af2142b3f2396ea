"""Discrete p-energies on refined level graphs and the conformal-dimension estimate.

The p-energy of a node w at depth k is the minimum of the sum over edges of
|f(u) - f(v)|^p on level [w]+k, with f = 1 on the descendants of w and f = 0
on nodes whose level-[w] ancestor is more than M hops from w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Literal

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import cg, spsolve

from dyadic_cubes.constants import (
    DEFAULT_BISECT_STEPS,
    DEFAULT_P_MAX,
    DEFAULT_P_MIN,
    DEFAULT_W_BUDGET,
    ENERGY_MAX_INNER,
    ENERGY_TOL,
    IRLS_DAMPING,
    SLOPE_BAND,
    WEIGHT_FLOOR,
)
from dyadic_cubes.core.errors import DepthUnavailable, InsufficientDepth, InvalidInput, NoConvergence
from dyadic_cubes.cubes import CubeSystem
from dyadic_cubes.framework import RefTree, level_graph
from dyadic_cubes.nets import NodeId
from dyadic_cubes.pool import map_ordered

Verdict = Literal["decaying", "flat", "growing"]


@dataclass(eq=False)
class EnergyProblem:
    """Boundary-value problem on an undirected graph (symmetric 0/1 adjacency)."""

    adjacency: sparse.csr_matrix
    source: np.ndarray
    sink: np.ndarray
    p: float
    source_value: float = 1.0
    w: NodeId | None = None
    k: int = 0
    M: int = 0
    nodes: list[NodeId] = field(default_factory=list)

    def __post_init__(self):
        n = self.adjacency.shape[0]
        if self.adjacency.shape != (n, n):
            raise InvalidInput("adjacency must be square")
        self.source = np.asarray(self.source, dtype=bool)
        self.sink = np.asarray(self.sink, dtype=bool)
        if self.source.shape != (n,) or self.sink.shape != (n,):
            raise InvalidInput("source and sink masks must match the vertex count")
        if not self.p > 1:
            raise InvalidInput(f"p must exceed 1, got {self.p}")
        if (self.source & self.sink).any():
            raise InvalidInput("source and sink overlap")
        if not self.source.any():
            raise InvalidInput("source set is empty")

    @property
    def free(self) -> np.ndarray:
        return ~(self.source | self.sink)


@dataclass
class EnergyResult:
    value: float
    potential: np.ndarray
    iterations: int
    residual: float


@dataclass
class DecayProfile:
    p: float
    table: dict[int, float]
    slope: float
    verdict: Verdict
    band: float

    def to_dict(self) -> dict[str, Any]:
        return {"p": self.p, "table": {str(k): v for k, v in self.table.items()},
                "slope": self.slope, "verdict": self.verdict, "band": self.band}


@dataclass
class ArcEstimate:
    p_low: float
    p_high: float
    slopes: dict[float, float]
    verdicts: dict[float, Verdict]
    floor: bool = False
    ceiling: bool = False
    M: int = 0
    profiles: list[DecayProfile] = field(default_factory=list)

    @property
    def summary(self) -> str:
        if self.floor:
            return f"<= {self.p_high:g}"
        if self.ceiling:
            return f"> {self.p_low:g}"
        return f"in [{self.p_low:.4g}, {self.p_high:.4g}]"

    def to_dict(self) -> dict[str, Any]:
        return {
            "p_low": self.p_low,
            "p_high": self.p_high,
            "summary": self.summary,
            "floor": self.floor,
            "ceiling": self.ceiling,
            "M": self.M,
            "slopes": [[p, s] for p, s in sorted(self.slopes.items())],
            "verdicts": [[p, v] for p, v in sorted(self.verdicts.items())],
            "profiles": [pr.to_dict() for pr in self.profiles],
        }


# ── Solver ───────────────────────────────────────────────────────


def _edges(adjacency: sparse.csr_matrix) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = sparse.triu(adjacency, k=1).nonzero()
    return rows, cols


def p_energy(adjacency: sparse.csr_matrix, f: np.ndarray, p: float) -> float:
    """Sum over unordered edges of |f(u) - f(v)|^p."""
    rows, cols = _edges(adjacency)
    return float(np.sum(np.abs(f[rows] - f[cols]) ** p))


def _hops(adjacency: sparse.csr_matrix, start: np.ndarray) -> np.ndarray:
    """Hop distance from a vertex set (inf when unreachable)."""
    dist = np.full(start.size, np.inf)
    dist[start] = 0
    frontier = start.copy()
    step = 0
    while frontier.any():
        step += 1
        reached = (adjacency @ frontier.astype(float)) > 0
        frontier = reached & ~np.isfinite(dist)
        dist[frontier] = step
    return dist


def _initial_potential(problem: EnergyProblem) -> np.ndarray:
    d_src = _hops(problem.adjacency, problem.source)
    d_sink = _hops(problem.adjacency, problem.sink)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = d_sink / (d_src + d_sink)
    f[~np.isfinite(d_sink)] = 1.0
    f[~np.isfinite(d_src) & np.isfinite(d_sink)] = 0.0
    return np.nan_to_num(f, nan=0.0) * problem.source_value


def _weighted_laplacian(adjacency: sparse.csr_matrix, rows: np.ndarray, cols: np.ndarray,
                        weights: np.ndarray) -> sparse.csr_matrix:
    n = adjacency.shape[0]
    w = sparse.csr_matrix((np.concatenate([weights, weights]),
                           (np.concatenate([rows, cols]), np.concatenate([cols, rows]))), shape=(n, n))
    degree = np.asarray(w.sum(axis=1)).ravel()
    return (sparse.diags(degree) - w).tocsr()


def solve_p_harmonic(
    problem: EnergyProblem,
    tol: float = ENERGY_TOL,
    max_iter: int = ENERGY_MAX_INNER,
) -> EnergyResult:
    """Minimize the p-energy by damped IRLS; p = 2 is a single direct solve."""
    if not tol > 0:
        raise InvalidInput(f"tol must be positive, got {tol}")
    adj = problem.adjacency.tocsr()
    p = problem.p
    f = _initial_potential(problem)
    f[problem.source] = problem.source_value
    f[problem.sink] = 0.0

    if not problem.sink.any():
        f[:] = problem.source_value
        return EnergyResult(value=0.0, potential=f, iterations=0, residual=0.0)

    free = problem.free.copy()
    if free.any():
        idx = np.flatnonzero(free)
        _, labels = csgraph.connected_components(adj[idx][:, idx], directed=False)
        for comp in np.unique(labels):
            members = labels == comp
            reach = adj[idx[members]]
            to_source = reach[:, problem.source].sum() > 0
            to_sink = reach[:, problem.sink].sum() > 0
            if not (to_source and to_sink):
                # only one boundary value is reachable, so the component is constant
                f[idx[members]] = problem.source_value if to_source else 0.0
                free[idx[members]] = False

    rows, cols = _edges(adj)
    if not free.any():
        return EnergyResult(value=p_energy(adj, f, p), potential=f, iterations=0, residual=0.0)

    fixed = ~free

    def _solve(weights: np.ndarray, x0: np.ndarray) -> np.ndarray:
        lap = _weighted_laplacian(adj, rows, cols, weights)
        a = lap[free][:, free]
        rhs = -(lap[free][:, fixed] @ f[fixed])
        if p == 2:
            return np.atleast_1d(spsolve(a.tocsc(), rhs))
        jacobi = sparse.diags(1.0 / a.diagonal())
        sol, _ = cg(a, rhs, x0=x0, rtol=1e-12, atol=0.0, M=jacobi, maxiter=10 * a.shape[0] + 100)
        return sol

    weights = np.ones(rows.size)
    f[free] = np.clip(_solve(weights, f[free]), 0.0, problem.source_value)
    value = p_energy(adj, f, p)
    if p == 2:
        return EnergyResult(value=value, potential=f, iterations=1, residual=0.0)

    change = math.inf
    for it in range(2, max_iter + 1):
        grad = np.maximum(np.abs(f[rows] - f[cols]), WEIGHT_FLOOR)
        weights = IRLS_DAMPING * weights + (1 - IRLS_DAMPING) * grad ** (p - 2)
        f[free] = np.clip(_solve(weights, f[free]), 0.0, problem.source_value)
        new_value = p_energy(adj, f, p)
        change = abs(new_value - value) / max(value, 1e-300)
        value = new_value
        if change < tol:
            return EnergyResult(value=value, potential=f, iterations=it, residual=change)
    raise NoConvergence(max_iter, residual=change)


# ── Problems on the tree ─────────────────────────────────────────


def build_problem(cs: CubeSystem, tree: RefTree, p: float, w: NodeId, k: int, M: int) -> EnergyProblem:
    h = cs.hierarchy
    if k < 1:
        raise InvalidInput(f"depth k must be >= 1, got {k}")
    if M < 1:
        raise InvalidInput(f"M must be >= 1, got {M}")
    if w.k + k > h.k_max:
        raise DepthUnavailable(w.k + k, h.k_max)

    top = level_graph(tree, cs, tree.level(w))
    hops = top.hops_from(w)
    fine = level_graph(tree, cs, tree.level(w) + k)
    owners = np.array([tree.ancestor(u, k).n - 1 for u in fine.nodes], dtype=int)
    source = owners == w.n - 1
    sink = hops[owners] > M

    adj = fine.adjacency
    touches_inner = (adj @ (~sink).astype(float)) > 0
    keep = ~sink | touches_inner
    idx = np.flatnonzero(keep)
    return EnergyProblem(
        adjacency=adj[idx][:, idx].tocsr(),
        source=source[idx],
        sink=sink[idx],
        p=p,
        w=w,
        k=k,
        M=M,
        nodes=[fine.nodes[i] for i in idx],
    )


def energy(
    cs: CubeSystem,
    tree: RefTree,
    p: float,
    w: NodeId,
    k: int,
    M: int,
    tol: float = ENERGY_TOL,
) -> EnergyResult:
    return solve_p_harmonic(build_problem(cs, tree, p, w, k, M), tol=tol)


def _slope_verdict(slope: float, band: float) -> Verdict:
    if slope < -band:
        return "decaying"
    if slope > band:
        return "growing"
    return "flat"


def _constrained_energy(
    cs: CubeSystem, tree: RefTree, p: float, w: NodeId, k: int, M: int, tol: float
) -> float | None:
    problem = build_problem(cs, tree, p, w, k, M)
    if not problem.sink.any():
        return None
    return solve_p_harmonic(problem, tol=tol).value


def _sample_level(tree: RefTree, level: int, budget: int, seed: int) -> list[NodeId]:
    nodes = tree.at_level(level)
    if len(nodes) <= budget:
        return nodes
    rng = np.random.default_rng((seed, level))
    picks = np.sort(rng.choice(len(nodes), size=budget, replace=False))
    return [nodes[i] for i in picks]


def decay_profile(
    cs: CubeSystem,
    tree: RefTree,
    p: float,
    M: int,
    k_range: Iterable[int] | None = None,
    w_budget: int = DEFAULT_W_BUDGET,
    seed: int = 0,
    tol: float = ENERGY_TOL,
    workers: int | None = None,
) -> DecayProfile:
    """sup_w E_{p,k,w,M} per depth k and the least-squares slope of its log."""
    ks = list(range(1, tree.depth + 1)) if k_range is None else sorted(set(k_range))
    if any(k < 1 or k > tree.depth for k in ks):
        raise InvalidInput(f"depths must lie in [1, {tree.depth}], got {ks}")

    jobs = [(w, k) for k in ks for level in range(0, tree.depth - k + 1)
            for w in _sample_level(tree, level, w_budget, seed)]
    values = map_ordered(lambda job: _constrained_energy(cs, tree, p, job[0], job[1], M, tol), jobs, workers)

    # depths whose sampled problems all have an empty sink carry no information
    table: dict[int, float] = {}
    for (_, k), v in zip(jobs, values):
        if v is not None:
            table[k] = max(table.get(k, 0.0), v)

    band = SLOPE_BAND * abs(math.log(cs.hierarchy.r))
    if len(table) < 3:
        raise InsufficientDepth(len(table))
    usable = [k for k in sorted(table) if table[k] > 0]
    if len(usable) >= 3:
        slope = float(np.polyfit(usable, np.log([table[k] for k in usable]), 1)[0])
    else:
        slope = -math.inf
    return DecayProfile(p=p, table=table, slope=slope, verdict=_slope_verdict(slope, band), band=band)


def estimate_arc_dim(
    cs: CubeSystem,
    tree: RefTree,
    M: int,
    p_min: float = DEFAULT_P_MIN,
    p_max: float = DEFAULT_P_MAX,
    steps: int = DEFAULT_BISECT_STEPS,
    k_range: Iterable[int] | None = None,
    w_budget: int = DEFAULT_W_BUDGET,
    seed: int = 0,
    tol: float = ENERGY_TOL,
    workers: int | None = None,
) -> ArcEstimate:
    """Bisection on p over decay verdicts, confined to [p_min, p_max]."""
    if not 1 < p_min < p_max:
        raise InvalidInput(f"need 1 < p_min < p_max, got {p_min}, {p_max}")
    k_range = list(k_range) if k_range is not None else None
    profiles: list[DecayProfile] = []

    def _run(p: float) -> DecayProfile:
        prof = decay_profile(cs, tree, p, M, k_range, w_budget, seed, tol, workers)
        profiles.append(prof)
        return prof

    def _result(lo: float, hi: float, floor: bool = False, ceiling: bool = False) -> ArcEstimate:
        return ArcEstimate(
            p_low=lo, p_high=hi,
            slopes={pr.p: pr.slope for pr in profiles},
            verdicts={pr.p: pr.verdict for pr in profiles},
            floor=floor, ceiling=ceiling, M=M, profiles=list(profiles),
        )

    if _run(p_min).verdict == "decaying":
        return _result(1.0, p_min, floor=True)
    if _run(p_max).verdict != "decaying":
        return _result(p_max, math.inf, ceiling=True)
    lo, hi = p_min, p_max
    for _ in range(steps):
        mid = (lo + hi) / 2
        if _run(mid).verdict == "decaying":
            hi = mid
        else:
            lo = mid
    return _result(lo, hi)
