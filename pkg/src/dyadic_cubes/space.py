"""Finite metric spaces, benchmark generators and geometric constant estimates.

A MetricSpace is either backed by a dense distance matrix (loaded input) or by
coordinates with Euclidean distance (generated spaces, point clouds). Rows are
served lazily for coordinate spaces so large generators never allocate n x n.
"""

from __future__ import annotations

import math
import pathlib
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from dyadic_cubes.constants import (
    DENSE_SAMPLE_LIMIT,
    GAMMA_SAFETY,
    MAX_POINTS,
    METRIC_TOL,
    SYMMETRY_TOL,
    TRIANGLE_EXHAUSTIVE_LIMIT,
    TRIANGLE_SAMPLE_TRIPLES,
)
from dyadic_cubes.core.errors import (
    AsymmetricInput,
    DegenerateSpace,
    InvalidInput,
    NonzeroDiagonal,
    SpecTooLarge,
    TriangleViolation,
)

PointId = int  # index in 0..n-1

_DESCRIPTOR_RE = re.compile(r"^(interval|grid|cantor|gasket):(\d+)$")


# ── Data classes ─────────────────────────────────────────────────


@dataclass(eq=False)
class MetricSpace:
    """Finite metric space with an exact distance oracle. Immutable after construction."""

    matrix: np.ndarray | None = None
    coords: np.ndarray | None = None
    labels: list[Any] | None = None
    name: str = ""
    resolution: float = field(init=False)

    def __post_init__(self):
        if (self.matrix is None) == (self.coords is None):
            raise InvalidInput("MetricSpace needs exactly one of matrix or coords")
        if self.matrix is not None:
            self.matrix.setflags(write=False)
        else:
            self.coords.setflags(write=False)
        self.resolution = self._resolution()

    @property
    def n(self) -> int:
        src = self.matrix if self.matrix is not None else self.coords
        return int(src.shape[0])

    def _resolution(self) -> float:
        if self.n < 2:
            return 0.0
        if self.matrix is not None:
            off = self.matrix[~np.eye(self.n, dtype=bool)]
            return float(off.min())
        nn, _ = cKDTree(self.coords).query(self.coords, k=2)
        res = float(nn[:, 1].min())
        if res <= 0:
            raise InvalidInput(f"{self.name or 'point cloud'} contains duplicate points")
        return res

    def d(self, a: PointId, b: PointId) -> float:
        if self.matrix is not None:
            return float(self.matrix[a, b])
        return float(np.linalg.norm(self.coords[a] - self.coords[b]))

    def row(self, i: PointId) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix[i]
        return cdist(self.coords[i : i + 1], self.coords)[0]

    def pairwise(self, a: np.ndarray | list[int], b: np.ndarray | list[int]) -> np.ndarray:
        a = np.asarray(a, dtype=int)
        b = np.asarray(b, dtype=int)
        if self.matrix is not None:
            return self.matrix[np.ix_(a, b)]
        return cdist(self.coords[a], self.coords[b])

    def eccentricity(self, i: PointId) -> float:
        return float(self.row(i).max())

    @cached_property
    def diameter(self) -> float:
        if self.n < 2:
            return 0.0
        if self.matrix is not None:
            return float(self.matrix.max())
        best = 0.0
        step = 512
        for start in range(0, self.n, step):
            block = cdist(self.coords[start : start + step], self.coords)
            best = max(best, float(block.max()))
        return best

    def ball(self, center: PointId, radius: float) -> np.ndarray:
        """Open ball B(center, radius) as sorted point ids."""
        return np.flatnonzero(self.row(center) < radius)

    def ball_matrix(self, centers: np.ndarray, radius: float, chunk: int = 512) -> sparse.csr_matrix:
        """Sparse 0/1 matrix: row i marks the open ball B(centers[i], radius)."""
        centers = np.asarray(centers, dtype=int)
        blocks = []
        for start in range(0, centers.size, chunk):
            part = self.pairwise(centers[start : start + chunk], np.arange(self.n)) < radius
            blocks.append(sparse.csr_matrix(part, dtype=np.float64))
        if not blocks:
            return sparse.csr_matrix((0, self.n))
        return sparse.vstack(blocks, format="csr")

    def distance_to_set(self, points: np.ndarray) -> np.ndarray:
        """d(x, A) for every x in the space."""
        points = np.asarray(points, dtype=int)
        if points.size == 0:
            return np.full(self.n, np.inf)
        if self.matrix is not None:
            return self.matrix[:, points].min(axis=1)
        dist, _ = cKDTree(self.coords[points]).query(self.coords, k=1)
        return np.asarray(dist, dtype=float)

    def neighbors_within(self, tol: float) -> list[np.ndarray]:
        """For each point, the ids at distance <= tol (itself included)."""
        if self.matrix is not None:
            return [np.flatnonzero(self.matrix[i] <= tol) for i in range(self.n)]
        tree = cKDTree(self.coords)
        # Small slack keeps lattice neighbours at exactly tol.
        lists = tree.query_ball_point(self.coords, r=tol * (1 + 1e-9) + 1e-15)
        return [np.array(sorted(l), dtype=int) for l in lists]


@dataclass
class GeometryEstimate:
    """Empirical uniform-perfectness and doubling constants."""

    gamma: float
    N_pack: int
    doubling_N: int

    def __post_init__(self):
        if not self.gamma > 1:
            raise InvalidInput(f"gamma must exceed 1, got {self.gamma}")
        if self.N_pack < 1 or self.doubling_N < 1:
            raise InvalidInput("packing counts must be positive")


# ── Construction ─────────────────────────────────────────────────


def load_distance_matrix(raw: Any, name: str = "matrix") -> MetricSpace:
    """Validate a square distance matrix and wrap it as a MetricSpace."""
    d = np.array(raw, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
        raise InvalidInput(f"distance matrix must be square and nonempty, got shape {d.shape}")
    n = d.shape[0]

    diag = np.diag(d)
    bad = np.flatnonzero(diag != 0)
    if bad.size:
        raise NonzeroDiagonal(int(bad[0]), float(diag[bad[0]]))

    asym = np.abs(d - d.T)
    if asym.max() > SYMMETRY_TOL:
        a, b = np.unravel_index(int(np.argmax(asym)), asym.shape)
        raise AsymmetricInput(int(min(a, b)), int(max(a, b)), float(asym[a, b]))
    d = (d + d.T) / 2

    off = ~np.eye(n, dtype=bool)
    if n > 1 and d[off].min() <= 0:
        a, b = np.argwhere((d <= 0) & off)[0]
        raise InvalidInput(f"d({a},{b}) = {d[a, b]!r}; distinct points need positive distance")

    _check_triangle(d)
    return MetricSpace(matrix=d, name=name)


def _check_triangle(d: np.ndarray) -> None:
    n = d.shape[0]
    tol = METRIC_TOL * max(1.0, float(d.max()))
    if n <= TRIANGLE_EXHAUSTIVE_LIMIT:
        for b in range(n):
            excess = d - (d[:, b][:, None] + d[b][None, :])
            hit = np.argwhere(excess > tol)
            if hit.size:
                a, c = (int(v) for v in hit[0])
                raise TriangleViolation(a, b, c, float(excess[a, c]))
        return
    rng = np.random.default_rng(0)
    a, b, c = rng.integers(0, n, size=(3, TRIANGLE_SAMPLE_TRIPLES))
    excess = d[a, c] - d[a, b] - d[b, c]
    hit = np.flatnonzero(excess > tol)
    if hit.size:
        i = hit[0]
        raise TriangleViolation(int(a[i]), int(b[i]), int(c[i]), float(excess[i]))


def from_points(coords: Any, name: str = "points") -> MetricSpace:
    pts = np.array(coords, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise InvalidInput(f"point cloud must be a nonempty 2-D array, got shape {pts.shape}")
    return MetricSpace(coords=pts, name=name)


# ── Generators ───────────────────────────────────────────────────


def generator_size(kind: str, param: int) -> int:
    if kind == "interval":
        return param
    if kind == "grid":
        return param * param
    if kind == "cantor":
        return 2 ** (param + 1)
    if kind == "gasket":
        return 3 * (3**param + 1) // 2
    raise InvalidInput(f"unknown generator {kind!r}")


def parse_descriptor(descriptor: str) -> tuple[str, int]:
    m = _DESCRIPTOR_RE.match(descriptor.strip())
    if not m:
        raise InvalidInput(
            f"bad generator descriptor {descriptor!r}; expected interval:N, grid:M, cantor:L or gasket:L"
        )
    return m.group(1), int(m.group(2))


def is_descriptor(value: str) -> bool:
    return bool(_DESCRIPTOR_RE.match(value.strip()))


def generate_space(descriptor: str, cap: int = MAX_POINTS) -> MetricSpace:
    """Build a benchmark space from a descriptor such as ``"interval:1025"``."""
    kind, param = parse_descriptor(descriptor)
    count = generator_size(kind, param)
    if count > cap:
        raise SpecTooLarge(descriptor, count, cap)
    if count < 1 or (kind in ("interval", "grid") and param < 1):
        raise InvalidInput(f"{descriptor} describes an empty space")

    if kind == "interval":
        coords = np.linspace(0.0, 1.0, param)[:, None] if param > 1 else np.zeros((1, 1))
    elif kind == "grid":
        axis = np.linspace(0.0, 1.0, param) if param > 1 else np.zeros(1)
        xs, ys = np.meshgrid(axis, axis, indexing="ij")
        coords = np.column_stack([xs.ravel(), ys.ravel()])
    elif kind == "cantor":
        coords = (_cantor_endpoints(param) / 3.0**param)[:, None]
    else:
        coords = _gasket_vertices(param)
    return MetricSpace(coords=coords, name=descriptor)


def _cantor_endpoints(level: int) -> np.ndarray:
    intervals = [(0, 3**level)]
    for _ in range(level):
        nxt = []
        for a, b in intervals:
            third = (b - a) // 3
            nxt.append((a, a + third))
            nxt.append((b - third, b))
        intervals = nxt
    ends = sorted({e for iv in intervals for e in iv})
    return np.array(ends, dtype=float)


def _gasket_vertices(level: int) -> np.ndarray:
    """Vertices of the level-``level`` Sierpinski gasket graph, lattice-sorted."""
    size = 2**level
    seen: set[tuple[int, int]] = set()

    def _walk(i: int, j: int, s: int) -> None:
        if s == 1 or level == 0:
            seen.update({(i, j), (i + s, j), (i, j + s)})
            return
        h = s // 2
        _walk(i, j, h)
        _walk(i + h, j, h)
        _walk(i, j + h, h)

    _walk(0, 0, size)
    lattice = np.array(sorted(seen), dtype=float)
    x = (lattice[:, 0] + lattice[:, 1] / 2.0) / size
    y = (lattice[:, 1] * math.sqrt(3) / 2.0) / size
    return np.column_stack([x, y])


# ── File input ───────────────────────────────────────────────────


def read_space_file(path: pathlib.Path) -> MetricSpace:
    """Read a distance-matrix file (first line n) or a point-cloud file."""
    path = pathlib.Path(path)
    lines = [l for l in path.read_text(encoding="utf-8").splitlines() if l.strip()]
    if not lines:
        raise InvalidInput(f"{path} is empty")
    head = lines[0].split()
    if len(head) == 1 and head[0].isdigit():
        n = int(head[0])
        rows = [l.split() for l in lines[1:]]
        if len(rows) == n and all(len(r) == n for r in rows):
            return load_distance_matrix([[float(t) for t in r] for r in rows], name=path.name)
    return from_points(np.loadtxt(path, ndmin=2), name=path.name)


def resolve_input(value: str, cap: int = MAX_POINTS) -> MetricSpace:
    if is_descriptor(value):
        return generate_space(value, cap=cap)
    path = pathlib.Path(value)
    if not path.is_file():
        raise FileNotFoundError(f"input file not found: {value}")
    space = read_space_file(path)
    if space.n > cap:
        raise SpecTooLarge(value, space.n, cap)
    return space


# ── Geometric constants ──────────────────────────────────────────


def _sample_centers(space: MetricSpace, samples: int, rng: np.random.Generator) -> np.ndarray:
    if space.n <= DENSE_SAMPLE_LIMIT:
        return np.arange(space.n)
    return np.sort(rng.choice(space.n, size=min(samples, space.n), replace=False))


def _sample_radii(space: MetricSpace, centers: np.ndarray, samples: int) -> np.ndarray:
    dists = np.concatenate([space.row(int(c)) for c in centers[:256]])
    dists = dists[dists >= space.resolution]
    qs = np.quantile(dists, np.linspace(0.0, 1.0, max(samples, 2)))
    return np.unique(qs[qs > 0])


def estimate_gamma(space: MetricSpace, samples: int = 64, seed: int = 0) -> float:
    """Smallest sampled gamma' > 1 keeping every sampled annulus nonempty, times a safety factor."""
    if space.n < 2:
        raise DegenerateSpace("uniform perfectness needs at least two points")
    if samples < 1:
        raise InvalidInput("samples must be >= 1")
    rng = np.random.default_rng(seed)
    centers = _sample_centers(space, samples, rng)
    radii = _sample_radii(space, centers, samples)
    worst = 1.0
    for c in centers:
        sd = np.sort(space.row(int(c)))
        idx = np.searchsorted(sd, radii, side="left")
        valid = idx < space.n  # B(x, r) != X
        if valid.any():
            worst = max(worst, float((sd[idx[valid]] / radii[valid]).max()))
    return worst * GAMMA_SAFETY


def packing_number(space: MetricSpace, center: PointId, radius: float, separation: float) -> int:
    """Size of the greedy (index-order) separation-separated subset of B(center, radius)."""
    if radius <= 0 or separation <= 0:
        raise InvalidInput("radius and separation must be positive")
    cand = space.ball(center, radius)
    if cand.size <= 1:
        return int(cand.size)
    sub = space.pairwise(cand, cand)
    blocked = np.zeros(cand.size, dtype=bool)
    count = 0
    for i in range(cand.size):
        if blocked[i]:
            continue
        count += 1
        blocked |= sub[i] < separation
    return count


def estimate_packing(
    space: MetricSpace,
    alpha1: float,
    c_star: float,
    samples: int = 32,
    scales: int = 12,
    seed: int = 0,
) -> tuple[int, int]:
    """(N, doubling count) maximized over a sample grid of centers and scales s >= resolution/c*."""
    if space.n < 2:
        return 1, 1
    rng = np.random.default_rng(seed)
    centers = np.sort(rng.choice(space.n, size=min(samples, space.n), replace=False))
    s_lo = space.resolution / c_star
    s_hi = max(space.diameter / c_star, s_lo)
    grid = np.geomspace(s_lo, s_hi, num=scales)
    n_pack = 1
    doubling = 1
    for c in centers:
        for s in grid:
            n_pack = max(n_pack, packing_number(space, int(c), alpha1 * s, c_star * s))
            doubling = max(doubling, packing_number(space, int(c), 2 * s, s))
    return n_pack, doubling


def estimate_geometry(
    space: MetricSpace,
    alpha1: float,
    c_star: float,
    samples: int = 32,
    seed: int = 0,
) -> GeometryEstimate:
    gamma = estimate_gamma(space, samples=max(samples, 64), seed=seed)
    n_pack, doubling = estimate_packing(space, alpha1, c_star, samples=samples, seed=seed)
    return GeometryEstimate(gamma=gamma, N_pack=n_pack, doubling_N=doubling)
