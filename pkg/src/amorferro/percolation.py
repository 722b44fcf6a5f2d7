"""Connected components, Bernoulli edge thinning, and threshold estimation.

Finite-volume proxy for an infinite cluster: face-to-face spanning in free
boundary mode (seam-wrapping detection on the torus). Thresholds for the
intensity and for the bond-retention probability are estimated from the
crossing of spanning-probability curves at increasing system sizes, with a
parametric bootstrap for the confidence interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression, minimize
from scipy.special import expit

from . import kernels
from .geomgraph import GilbertGraph, build_graph, graph_from_edges
from .pointprocess import BoxWindow, sample_poisson
from .rng import stream, substream_seed

__all__ = [
    "ComponentLabeling",
    "ThresholdEstimate",
    "NoCrossingError",
    "connected_components",
    "spans",
    "wraps",
    "bernoulli_thin",
    "estimate_lambda_star",
    "estimate_q_star_empirical",
    "compute_q_star_bound",
    "beta_star_bound",
    "write_threshold_csv",
    "write_threshold_json",
]


class NoCrossingError(RuntimeError):
    """Raised when spanning curves give no usable crossing; carries the curves."""

    def __init__(self, message: str, curves=None):
        super().__init__(message)
        self.curves = curves


@dataclass
class ComponentLabeling:
    """Vertex partition into connected components (canonical min-index labels)."""

    labels: np.ndarray = field(repr=False)
    sizes: dict[int, int]
    largest_fraction: float

    @property
    def n_components(self) -> int:
        return len(self.sizes)

    def largest_label(self) -> int:
        """Label of the largest component; ties broken by smallest label."""
        best = min(self.sizes, key=lambda lab: (-self.sizes[lab], lab))
        return int(best)


def connected_components(graph: GilbertGraph) -> ComponentLabeling:
    labels = kernels.union_components(graph.n, graph.edge_i, graph.edge_j)
    uniq, counts = np.unique(labels, return_counts=True)
    sizes = {int(u): int(c) for u, c in zip(uniq, counts)}
    frac = float(counts.max() / graph.n) if graph.n else 0.0
    return ComponentLabeling(labels=labels, sizes=sizes, largest_fraction=frac)


def spans(graph: GilbertGraph, labeling: ComponentLabeling, axis: int) -> bool:
    """Face-to-face spanning: some component touches both faces along ``axis``.

    A vertex "touches" a face when it lies within r_star of it. Free boundary
    mode only; on the torus use wraps().
    """
    if graph.boundary_mode != "free":
        raise ValueError("spans() is face-to-face and needs free boundary mode; see wraps()")
    if graph.n == 0:
        return False
    half = graph.window.side / 2.0
    coord = graph.positions[:, axis]
    low = labeling.labels[coord <= -half + graph.r_star]
    high = labeling.labels[coord >= half - graph.r_star]
    if low.size == 0 or high.size == 0:
        return False
    return bool(np.intersect1d(low, high).size > 0)


def wraps(graph: GilbertGraph, labeling: ComponentLabeling, axis: int) -> bool:
    """Torus proxy: some component contains an edge whose minimal image crosses
    the seam in ``axis``."""
    if graph.boundary_mode != "torus":
        raise ValueError("wraps() requires torus boundary mode")
    if graph.n_edges == 0:
        return False
    dx = np.abs(graph.positions[graph.edge_i, axis] - graph.positions[graph.edge_j, axis])
    return bool(np.any(dx > graph.window.side / 2.0))


def bernoulli_thin(graph: GilbertGraph, q: float, seed: int) -> GilbertGraph:
    """Keep each edge independently with probability q; vertex set unchanged.

    The per-edge uniform is a function of (seed, canonical edge index) only,
    so thinnings at different q from the same seed are monotonically coupled:
    q1 <= q2 implies the q1 edge set is contained in the q2 edge set.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    u = stream(seed, "thin").random(graph.n_edges)
    keep = u < q
    return graph_from_edges(
        graph.window, graph.positions, graph.r_star, graph.edge_i[keep], graph.edge_j[keep]
    )


def compute_q_star_bound(lam: float, lambda_star: float) -> float:
    """Sufficient bond-retention bound lambda_star / lam (not the true threshold)."""
    if not lambda_star > 0:
        raise ValueError(f"lambda_star must be positive, got {lambda_star}")
    if lam < lambda_star:
        raise ValueError("lam must be >= lambda_star (bound would exceed 1)")
    return lambda_star / lam


def beta_star_bound(q: float, phi_star: float, a: float) -> float:
    """Sufficient inverse-temperature bound a^2 [ln(1+q) - ln(1-q)] / (2 phi_star)."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    if not (phi_star > 0 and a > 0):
        raise ValueError("phi_star and a must be positive")
    return a * a * (math.log1p(q) - math.log(1.0 - q)) / (2.0 * phi_star)


@dataclass
class ThresholdEstimate:
    parameter_name: str
    estimate: float
    ci_low: float
    ci_high: float
    curves: list[dict]
    crossings: dict[str, float]
    seed: int
    grid: list[float]

    def __post_init__(self):
        if not self.ci_low <= self.estimate <= self.ci_high:
            raise ValueError("estimate must lie inside its confidence interval")


def _fit_logistic(x: np.ndarray, k: np.ndarray, reps: int):
    """Binomial MLE of p(x) = expit((x - mu) / s); returns (mu, s)."""
    if k.max() == 0 or k.min() == reps:
        raise NoCrossingError("spanning curve is flat over the grid")
    frac = k / reps
    # crude location/scale start: linear interp of the 0.5 crossing
    mu0 = float(np.interp(0.5, frac, x))
    span = float(x[-1] - x[0])

    def nll(v):
        mu, log_s = v
        p = expit((x - mu) / math.exp(log_s))
        p = np.clip(p, 1e-12, 1.0 - 1e-12)
        return -float(np.sum(k * np.log(p) + (reps - k) * np.log(1.0 - p)))

    best = None
    for s0 in (span / 16.0, span / 4.0):
        res = minimize(
            nll,
            np.array([mu0, math.log(s0)]),
            method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 2000},
        )
        if best is None or res.fun < best.fun:
            best = res
    return float(best.x[0]), float(math.exp(best.x[1]))


def _pair_crossing(fit_a, fit_b, lo: float, hi: float) -> float:
    """Parameter where two fitted logistics intersect; must land inside the grid."""
    (mu1, s1), (mu2, s2) = fit_a, fit_b
    if s1 == s2:
        raise NoCrossingError("fitted curves are parallel")
    x = (s2 * mu1 - s1 * mu2) / (s2 - s1)
    if not lo <= x <= hi:
        raise NoCrossingError(f"fitted crossing {x:.4g} falls outside the grid")
    return x


def _estimate_from_counts(
    name: str, sizes, grid: np.ndarray, counts: np.ndarray, reps: int, seed: int, bootstrap: int
) -> ThresholdEstimate:
    curves = []
    for li, size in enumerate(sizes):
        frac = counts[li] / reps
        curves.append(
            {
                "L": float(size),
                "params": [float(v) for v in grid],
                "probs": [float(v) for v in frac],
                "probs_monotone": [float(v) for v in isotonic_regression(frac).x],
                "replicates": reps,
            }
        )
    try:
        fits = [_fit_logistic(grid, counts[li], reps) for li in range(len(sizes))]
        crossings = {
            f"{sizes[li]}x{sizes[li + 1]}": _pair_crossing(
                fits[li], fits[li + 1], grid[0], grid[-1]
            )
            for li in range(len(sizes) - 1)
        }
        estimate = crossings[f"{sizes[-2]}x{sizes[-1]}"]
    except NoCrossingError as err:
        err.curves = curves
        raise

    # parametric bootstrap of the largest-pair crossing
    gen = stream(seed, "bootstrap")
    samples = []
    for _ in range(bootstrap):
        boot = gen.binomial(reps, counts / reps)
        try:
            fit_a = _fit_logistic(grid, boot[-2], reps)
            fit_b = _fit_logistic(grid, boot[-1], reps)
            samples.append(_pair_crossing(fit_a, fit_b, grid[0], grid[-1]))
        except NoCrossingError:
            continue
    if len(samples) < bootstrap // 2:
        raise NoCrossingError("bootstrap crossings mostly degenerate", curves=curves)
    ci_low, ci_high = np.percentile(samples, [2.5, 97.5])
    return ThresholdEstimate(
        parameter_name=name,
        estimate=float(estimate),
        ci_low=float(min(ci_low, estimate)),
        ci_high=float(max(ci_high, estimate)),
        curves=curves,
        crossings={k: float(v) for k, v in crossings.items()},
        seed=int(seed),
        grid=[float(v) for v in grid],
    )


def _check_grid(sizes, grid) -> np.ndarray:
    if len(sizes) < 2:
        raise ValueError("need at least 2 system sizes")
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size < 3 or np.any(np.diff(grid) <= 0):
        raise ValueError("parameter grid must be strictly increasing with >= 3 points")
    return grid


def estimate_lambda_star(
    r_star: float,
    d: int,
    sizes,
    lambda_grid,
    replicates: int,
    seed: int,
    bootstrap: int = 200,
) -> ThresholdEstimate:
    """Finite-size-scaling estimate of the critical intensity.

    For each size and grid intensity, spanning probability along axis 0 over
    ``replicates`` independent configurations (free boundary); the estimate is
    the crossing of the logistic fits for the two largest sizes.
    """
    grid = _check_grid(sizes, lambda_grid)
    counts = np.zeros((len(sizes), grid.size), dtype=np.int64)
    for li, size in enumerate(sizes):
        window = BoxWindow(dim=d, side=float(size), boundary_mode="free")
        for pi, lam in enumerate(grid):
            hits = 0
            for rep in range(replicates):
                child = substream_seed(seed, "lambda-star", li, pi, rep)
                graph = build_graph(sample_poisson(float(lam), window, child), r_star)
                if spans(graph, connected_components(graph), axis=0):
                    hits += 1
            counts[li, pi] = hits
    return _estimate_from_counts("lambda", sizes, grid, counts, replicates, seed, bootstrap)


def estimate_q_star_empirical(
    lam: float,
    r_star: float,
    d: int,
    sizes,
    q_grid,
    replicates: int,
    seed: int,
    bootstrap: int = 200,
) -> ThresholdEstimate:
    """Finite-size-scaling estimate of the bond threshold at fixed intensity.

    One graph and one set of per-edge uniforms per (size, replicate); the q
    column is therefore monotonically coupled, and the q = 1 column equals the
    unthinned graph exactly.
    """
    grid = _check_grid(sizes, q_grid)
    if grid[0] < 0 or grid[-1] > 1:
        raise ValueError("q grid must lie in [0, 1]")
    counts = np.zeros((len(sizes), grid.size), dtype=np.int64)
    unthinned_top = 0
    for li, size in enumerate(sizes):
        window = BoxWindow(dim=d, side=float(size), boundary_mode="free")
        for rep in range(replicates):
            child = substream_seed(seed, "q-star", li, rep)
            graph = build_graph(sample_poisson(float(lam), window, child), r_star)
            thin_seed = substream_seed(seed, "q-star-thin", li, rep)
            for pi, q in enumerate(grid):
                thinned = bernoulli_thin(graph, float(q), thin_seed)
                if spans(thinned, connected_components(thinned), axis=0):
                    counts[li, pi] += 1
            if li == len(sizes) - 1:
                if spans(graph, connected_components(graph), axis=0):
                    unthinned_top += 1
    if unthinned_top < 0.8 * replicates:
        raise NoCrossingError(
            f"intensity {lam} not supercritical: unthinned spanning probability "
            f"{unthinned_top / replicates:.3f} at the largest size"
        )
    return _estimate_from_counts("q", sizes, grid, counts, replicates, seed, bootstrap)


def write_threshold_csv(path, est: ThresholdEstimate) -> None:
    """Long-form curve table: L,param,spanning_prob,replicates,se."""
    lines = ["L,param,spanning_prob,replicates,se"]
    for curve in est.curves:
        reps = curve["replicates"]
        for x, p in zip(curve["params"], curve["probs"]):
            se = math.sqrt(p * (1.0 - p) / reps)
            lines.append(f"{curve['L']!r},{x!r},{p!r},{reps},{se!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_threshold_json(path, est: ThresholdEstimate) -> None:
    import json

    payload = {
        "parameter": est.parameter_name,
        "estimate": est.estimate,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "crossings": est.crossings,
        "seeds": {"master": est.seed},
        "grid": est.grid,
        "curves": est.curves,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
