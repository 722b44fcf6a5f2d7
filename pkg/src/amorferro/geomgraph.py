"""Fixed-radius (Gilbert) graphs on point configurations, plus sparsity diagnostics.

Edges connect points at distance <= r_star (boundary included; ties are
edges). The metric follows the window: Euclidean in free mode, coordinate-wise
minimal image on the torus. Neighbor lists are index-sorted and edges are
iterated canonically (i < j, lexicographic), so seeded algorithms downstream
see a reproducible order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .pointprocess import BoxWindow, PointConfiguration, ball_volume, poisson_weighted_moment

__all__ = [
    "GilbertGraph",
    "SparsityReport",
    "build_graph",
    "brute_force_graph",
    "weight",
    "sparsity_functionals",
    "expected_a_bound",
    "weight_integral",
    "write_edges",
    "read_edges",
    "graph_from_edges",
]


@dataclass
class GilbertGraph:
    """Immutable fixed-radius graph: positions, canonical edge list, CSR adjacency."""

    window: BoxWindow
    positions: np.ndarray = field(repr=False)
    r_star: float
    edge_i: np.ndarray = field(repr=False)
    edge_j: np.ndarray = field(repr=False)
    nbr_indptr: np.ndarray = field(repr=False)
    nbr_indices: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edge_i.shape[0]

    @property
    def boundary_mode(self) -> str:
        return self.window.boundary_mode

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.nbr_indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.nbr_indices[self.nbr_indptr[v] : self.nbr_indptr[v + 1]]

    def edge_lengths(self) -> np.ndarray:
        """Distance per canonical edge, in the window metric."""
        d2 = np.zeros(self.n_edges, dtype=np.float64)
        for ax in range(self.window.dim):
            dx = np.abs(self.positions[self.edge_j, ax] - self.positions[self.edge_i, ax])
            if self.boundary_mode == "torus":
                dx = np.minimum(dx, self.window.side - dx)
            d2 = d2 + dx * dx
        return np.sqrt(d2)

    def validate(self) -> None:
        """Structural invariants: i<j canonical edges, symmetric sorted adjacency."""
        if np.any(self.edge_i >= self.edge_j):
            raise ValueError("edges must satisfy i < j")
        if self.nbr_indptr[-1] != 2 * self.n_edges:
            raise ValueError("adjacency size inconsistent with edge count")
        for v in range(self.n):
            nb = self.neighbors(v)
            if np.any(np.diff(nb) <= 0):
                raise ValueError(f"neighbor list of {v} not strictly sorted")
            if np.any(nb == v):
                raise ValueError(f"self-loop at {v}")


def _canonical_edges(ei: np.ndarray, ej: np.ndarray):
    lo = np.minimum(ei, ej)
    hi = np.maximum(ei, ej)
    order = np.lexsort((hi, lo))
    return lo[order], hi[order]


def _adjacency_csr(n: int, ei: np.ndarray, ej: np.ndarray):
    src = np.concatenate([ei, ej])
    dst = np.concatenate([ej, ei])
    order = np.lexsort((dst, src))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst[order]


def graph_from_edges(
    window: BoxWindow, positions: np.ndarray, r_star: float, ei: np.ndarray, ej: np.ndarray
) -> GilbertGraph:
    """Assemble a graph from an arbitrary (unordered) edge list."""
    ei = np.asarray(ei, dtype=np.int64)
    ej = np.asarray(ej, dtype=np.int64)
    ei, ej = _canonical_edges(ei, ej)
    indptr, indices = _adjacency_csr(positions.shape[0], ei, ej)
    return GilbertGraph(
        window=window,
        positions=np.ascontiguousarray(positions, dtype=np.float64),
        r_star=float(r_star),
        edge_i=ei,
        edge_j=ej,
        nbr_indptr=indptr,
        nbr_indices=indices,
    )


def _check_radius(points: PointConfiguration, r_star: float) -> None:
    if not r_star > 0:
        raise ValueError(f"r_star must be positive, got {r_star}")
    if points.window.boundary_mode == "torus" and not r_star < points.window.side / 2:
        raise ValueError("torus mode needs r_star < side/2 for an unambiguous minimal image")


def build_graph(points: PointConfiguration, r_star: float) -> GilbertGraph:
    """Exact fixed-radius graph via cell lists (expected linear at constant degree)."""
    _check_radius(points, r_star)
    positions = np.ascontiguousarray(points.points, dtype=np.float64)
    ei, ej = kernels.cell_edges(
        positions, float(r_star), points.window.side, points.window.boundary_mode == "torus"
    )
    return graph_from_edges(points.window, positions, r_star, ei, ej)


def brute_force_graph(points: PointConfiguration, r_star: float) -> GilbertGraph:
    """O(n^2) all-pairs oracle with the same contract as build_graph."""
    _check_radius(points, r_star)
    positions = np.ascontiguousarray(points.points, dtype=np.float64)
    n = positions.shape[0]
    w = points.window
    d2 = np.zeros((n, n), dtype=np.float64)
    for ax in range(w.dim):
        dx = np.abs(positions[:, ax][:, None] - positions[:, ax][None, :])
        if w.boundary_mode == "torus":
            dx = np.minimum(dx, w.side - dx)
        d2 = d2 + dx * dx
    mask = np.triu(d2 <= r_star * r_star, k=1)
    ei, ej = np.nonzero(mask)
    return graph_from_edges(w, positions, r_star, ei.astype(np.int64), ej.astype(np.int64))


def weight(alpha: float, x: np.ndarray):
    """Exponential weight exp(-alpha |x|), |x| Euclidean from the window center."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    norm = np.sqrt(np.sum(np.atleast_2d(x) ** 2, axis=1))
    out = np.exp(-alpha * norm)
    return float(out[0]) if x.ndim == 1 else out


@dataclass(frozen=True)
class SparsityReport:
    alpha: float
    theta: float
    a_gamma: float
    b_gamma: float
    max_degree: int
    mean_degree: float


def sparsity_functionals(graph: GilbertGraph, alpha: float, theta: float) -> SparsityReport:
    """Window-restricted degree/weight sums used as growth diagnostics.

    a = sum over edges of [w(x)+w(y)] (deg(x) deg(y))^theta, b = sum of w over
    vertices.
    """
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    w = weight(alpha, graph.positions) if graph.n else np.zeros(0)
    deg = graph.degrees.astype(np.float64)
    b_gamma = float(np.sum(w))
    if graph.n_edges:
        wi = w[graph.edge_i]
        wj = w[graph.edge_j]
        a_gamma = float(np.sum((wi + wj) * (deg[graph.edge_i] * deg[graph.edge_j]) ** theta))
    else:
        a_gamma = 0.0
    return SparsityReport(
        alpha=float(alpha),
        theta=float(theta),
        a_gamma=a_gamma,
        b_gamma=b_gamma,
        max_degree=int(deg.max()) if graph.n else 0,
        mean_degree=float(deg.mean()) if graph.n else 0.0,
    )


def weight_integral(alpha: float, d: int) -> float:
    """Integral of exp(-alpha |x|) over all of R^d (2 pi / a^2 or 8 pi / a^3)."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if d == 2:
        return 2.0 * math.pi / alpha**2
    if d == 3:
        return 8.0 * math.pi / alpha**3
    raise ValueError(f"unsupported dimension {d}")


def expected_a_bound(lam: float, alpha: float, theta: float, r_star: float, d: int) -> float:
    """Closed-form upper bound on the mean of a_gamma at intensity ``lam``.

    Equals the (2 theta + 1)-weighted Poisson moment at mean lam * V(2 r_star),
    times the full-space weight integral.
    """
    if not (lam > 0 and theta > 0 and r_star > 0):
        raise ValueError("lam, theta, r_star must be positive")
    kappa = lam * ball_volume(d, 2.0 * r_star)
    return poisson_weighted_moment(2.0 * theta + 1.0, kappa) * weight_integral(alpha, d)


def write_edges(path, graph: GilbertGraph) -> None:
    """Edge CSV: `# n=`, `# r_star=` headers, rows `i,j` with i < j (0-based)."""
    lines = [f"# n={graph.n}", f"# r_star={graph.r_star!r}"]
    for i, j in zip(graph.edge_i, graph.edge_j):
        lines.append(f"{i},{j}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_edges(path):
    """Returns (n, r_star, edge_i, edge_j) from an edge CSV."""
    header: dict[str, str] = {}
    ei, ej = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line.lstrip("# ").partition("=")
                header[key.strip()] = value.strip()
            else:
                a, b = line.split(",")
                ei.append(int(a))
                ej.append(int(b))
    return (
        int(header["n"]),
        float(header["r_star"]),
        np.asarray(ei, dtype=np.int64),
        np.asarray(ej, dtype=np.int64),
    )
