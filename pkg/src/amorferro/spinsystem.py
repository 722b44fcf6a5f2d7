"""Finite-volume Gibbs machinery on a quenched graph.

Interior vertices carry dynamic spins; every vertex outside the interior is
clamped to a constant boundary value s. Two-state spins update by heat bath,
continuous spins by random-walk Metropolis, both in systematic sweeps over
the interior in index order so that seeded runs are reproducible and the
mirror coupling (s, u) -> (-s, 1-u) negates trajectories exactly.

Exact references for small systems: full-state enumeration for two-state
spins (<= 16 sites) and tensor-product Gauss-Legendre quadrature for
continuous spins (<= 3 sites).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse
from scipy.special import roots_legendre

from . import kernels
from .geomgraph import GilbertGraph, weight
from .rng import stream

__all__ = [
    "SingleSpinMeasure",
    "InteractionProfile",
    "SpinState",
    "ChainConfig",
    "ChainResult",
    "ConvergenceError",
    "relative_energy",
    "local_field",
    "heat_bath_step_ising",
    "metropolis_step_continuous",
    "run_chain",
    "magnetization",
    "core_subset",
    "window_subset",
    "exact_enumeration_ising",
    "quadrature_marginals",
    "check_moment_condition",
    "temperedness",
    "batch_means",
    "write_chain_csv",
]


class ConvergenceError(RuntimeError):
    """Quadrature did not reach the requested tolerance within the node cap."""


@lru_cache(maxsize=64)
def gauss_nodes(n: int):
    """Cached Gauss-Legendre nodes/weights on [-1, 1]. Do not mutate."""
    x, w = roots_legendre(n)
    return x, w


@lru_cache(maxsize=128)
def _density_norm(measure: "SingleSpinMeasure", nodes: int = 4096) -> float:
    """Normalization of the unnormalized continuous density over its support."""
    x, w = gauss_nodes(nodes)
    half = measure.support_halfwidth()
    return float(np.sum(w * half * np.exp(measure.log_density(x * half))))


@dataclass(frozen=True)
class SingleSpinMeasure:
    """Symmetric a priori spin law: Ising atoms, uniform interval, or exp(-V).

    variant "ising": atoms at +-1 with weight 1/2 each.
    variant "uniform": uniform on [-b, b].
    variant "density": density proportional to exp(-(v4 t^4 + v2 t^2)); v4 > 0
    gives quartic tails, v4 = 0 with v2 > 0 is the Gaussian test density
    (note the u > 2 moment condition then fails, which check_moment_condition
    reports as divergence).
    """

    variant: str
    b: float = 1.0
    v4: float = 1.0
    v2: float = 0.0

    def __post_init__(self):
        if self.variant not in ("ising", "uniform", "density"):
            raise ValueError(f"unknown measure variant {self.variant!r}")
        if self.variant == "uniform" and not self.b > 0:
            raise ValueError("uniform interval needs half-width b > 0")
        if self.variant == "density":
            if self.v4 < 0 or (self.v4 == 0 and not self.v2 > 0):
                raise ValueError("density needs v4 > 0, or v4 = 0 with v2 > 0")

    @property
    def is_continuous(self) -> bool:
        return self.variant != "ising"

    def label(self) -> str:
        if self.variant == "ising":
            return "ising"
        if self.variant == "uniform":
            return f"uniform(b={self.b!r})"
        return f"density(v4={self.v4!r},v2={self.v2!r})"

    def log_density(self, t: np.ndarray) -> np.ndarray:
        """Unnormalized log density (continuous variants only)."""
        t = np.asarray(t, dtype=np.float64)
        if self.variant == "uniform":
            return np.where(np.abs(t) <= self.b, 0.0, -np.inf)
        if self.variant == "density":
            t2 = t * t
            return -(self.v4 * t2 * t2 + self.v2 * t2)
        raise ValueError("atomic measure has no density")

    def support_halfwidth(self) -> float:
        """Truncation point: density below 1e-16 of its peak outside [-T, T]."""
        if self.variant == "ising":
            return 1.0
        if self.variant == "uniform":
            return self.b
        # peak of -(v4 t^4 + v2 t^2): at t = 0, or t^2 = -v2/(2 v4) for v2 < 0
        peak = 0.0
        if self.v4 > 0 and self.v2 < 0:
            peak = self.v2**2 / (4.0 * self.v4)
        drop = peak + 16.0 * math.log(10.0)
        if self.v4 == 0:
            return math.sqrt(drop / self.v2)
        t2 = (-self.v2 + math.sqrt(self.v2**2 + 4.0 * self.v4 * drop)) / (2.0 * self.v4)
        return math.sqrt(t2)

    def moment(self, k: int, nodes: int = 2048) -> float:
        """Normalized k-th moment of the spin law."""
        if self.variant == "ising":
            return 1.0 if k % 2 == 0 else 0.0
        if k % 2 == 1:
            return 0.0
        if self.variant == "uniform":
            return self.b**k / (k + 1.0)
        x, w = gauss_nodes(nodes)
        half = self.support_halfwidth()
        t = x * half
        rho = np.exp(self.log_density(t))
        return float(np.sum(w * t**k * rho) / np.sum(w * rho))

    def variance(self) -> float:
        return self.moment(2)

    def mode_value(self) -> float:
        """Location of the density peak on the nonnegative axis (1 for atoms)."""
        if self.variant == "ising":
            return 1.0
        if self.variant == "uniform":
            return self.b
        if self.v4 > 0 and self.v2 < 0:
            return math.sqrt(-self.v2 / (2.0 * self.v4))
        return 0.0

    def interval_mass(self, lo: float, hi: float, nodes: int = 2048) -> float:
        """Normalized mass of the closed interval [lo, hi] (hi may be inf)."""
        if self.variant == "ising":
            return sum(0.5 for atom in (-1.0, 1.0) if lo <= atom <= hi)
        T = self.support_halfwidth()
        hi = min(hi, T)
        lo = max(lo, -T)
        if hi <= lo:
            return 0.0
        if self.variant == "uniform":
            return (hi - lo) / (2.0 * self.b)
        x, w = gauss_nodes(nodes)
        mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
        num = float(np.sum(w * half * np.exp(self.log_density(mid + half * x))))
        return num / _density_norm(self)


@dataclass(frozen=True)
class InteractionProfile:
    """Pair coupling phi(r): >= phi_star on [0, r_star], zero beyond.

    "constant": phi = phi_star on the range. "linear-taper": descends from
    ``peak`` (default 2 phi_star) at r = 0 to phi_star at r = r_star.
    """

    phi_star: float
    r_star: float
    shape: str = "constant"
    peak: float | None = None

    def __post_init__(self):
        if not (self.phi_star > 0 and self.r_star > 0):
            raise ValueError("phi_star and r_star must be positive")
        if self.shape not in ("constant", "linear-taper"):
            raise ValueError(f"unknown profile shape {self.shape!r}")
        if self.peak is not None and self.peak < self.phi_star:
            raise ValueError("taper peak must be >= phi_star")

    def phi(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        inside = r <= self.r_star
        if self.shape == "constant":
            out = np.where(inside, self.phi_star, 0.0)
        else:
            top = 2.0 * self.phi_star if self.peak is None else self.peak
            out = np.where(inside, top - (top - self.phi_star) * (r / self.r_star), 0.0)
        return out if out.ndim else float(out)

    def scaled(self, factor: float) -> "InteractionProfile":
        """Same shape with all coupling values multiplied by ``factor``."""
        return InteractionProfile(
            phi_star=self.phi_star * factor,
            r_star=self.r_star,
            shape=self.shape,
            peak=None if self.peak is None else self.peak * factor,
        )


@dataclass
class SpinState:
    """Spins on the interior vertex set; everything outside is clamped to s."""

    graph: GilbertGraph
    interior: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    boundary_value: float

    def __post_init__(self):
        self.interior = np.asarray(self.interior, dtype=np.int64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        if self.interior.size != self.sigma.size:
            raise ValueError("one spin per interior vertex required")
        if np.any(np.diff(self.interior) <= 0):
            raise ValueError("interior must be sorted and duplicate-free")

    def interior_position(self, v: int) -> int:
        pos = int(np.searchsorted(self.interior, v))
        if pos >= self.interior.size or self.interior[pos] != v:
            raise ValueError(f"vertex {v} is not interior")
        return pos


@dataclass(frozen=True)
class ChainConfig:
    """Chain parameters. init "measure" draws the start i.i.d. from the spin
    law; "aligned" starts at the density mode on the boundary's side, the
    seed for approximating the extremal boundary-condition state."""

    beta: float
    sweeps: int
    burn_in: int = 0
    proposal_width: float = 1.0
    seed: int = 0
    thin: int = 1
    init: str = "measure"

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if not self.sweeps > self.burn_in >= 0:
            raise ValueError("need sweeps > burn_in >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not self.proposal_width > 0:
            raise ValueError("proposal_width must be positive")
        if self.init not in ("measure", "aligned"):
            raise ValueError(f"unknown init mode {self.init!r}")


def _classify_edges(graph: GilbertGraph, interior: np.ndarray, profile: InteractionProfile):
    """Split edges into interior-interior and interior-boundary coupling lists."""
    n = graph.n
    is_int = np.zeros(n, dtype=bool)
    is_int[interior] = True
    pos_of = np.full(n, -1, dtype=np.int64)
    pos_of[interior] = np.arange(interior.size, dtype=np.int64)
    phi = profile.phi(graph.edge_lengths()) if graph.n_edges else np.zeros(0)
    live = phi > 0.0
    ei, ej, phi = graph.edge_i[live], graph.edge_j[live], phi[live]
    both = is_int[ei] & is_int[ej]
    ii = (pos_of[ei[both]], pos_of[ej[both]], phi[both])
    cross = is_int[ei] ^ is_int[ej]
    ci, cj, cphi = ei[cross], ej[cross], phi[cross]
    inner = np.where(is_int[ci], ci, cj)
    ib = (pos_of[inner], cphi)
    return ii, ib, pos_of


@dataclass
class _ChainSystem:
    """CSR coupling arrays over interior positions, ready for the sweep kernels."""

    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    ext_strength: np.ndarray
    matrix: scipy.sparse.csr_matrix

    @classmethod
    def build(cls, graph: GilbertGraph, interior: np.ndarray, profile: InteractionProfile):
        m = interior.size
        (pi, pj, phi), (pb, phib), _ = _classify_edges(graph, interior, profile)
        src = np.concatenate([pi, pj])
        dst = np.concatenate([pj, pi])
        val = np.concatenate([phi, phi])
        order = np.lexsort((dst, src))
        indptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=m), out=indptr[1:])
        indices = dst[order].astype(np.int64)
        weights = val[order]
        ext = np.zeros(m, dtype=np.float64)
        np.add.at(ext, pb, phib)
        matrix = scipy.sparse.csr_matrix((weights, indices, indptr), shape=(m, m))
        return cls(indptr, indices, weights, ext, matrix)

    def energy(self, sigma: np.ndarray, s: float) -> float:
        pair = 0.5 * float(sigma @ (self.matrix @ sigma))
        bnd = s * float(np.dot(self.ext_strength, sigma))
        return -(pair + bnd)


def relative_energy(state: SpinState, profile: InteractionProfile) -> float:
    """Energy of the interior spins given the clamped boundary.

    Minus the sum of phi sigma_x sigma_y over interior pairs plus the
    interior-boundary cross terms with the constant boundary value.
    """
    system = _ChainSystem.build(state.graph, state.interior, profile)
    return system.energy(state.sigma, state.boundary_value)


def local_field(state: SpinState, profile: InteractionProfile, x: int) -> float:
    """Coefficient of sigma_x in the energy: sum of phi times neighbor spins."""
    state.interior_position(x)  # x must be interior
    g = state.graph
    h = 0.0
    nbrs = g.neighbors(x)
    if nbrs.size == 0:
        return 0.0
    d2 = np.zeros(nbrs.size, dtype=np.float64)
    for ax in range(g.window.dim):
        dx = np.abs(g.positions[nbrs, ax] - g.positions[x, ax])
        if g.boundary_mode == "torus":
            dx = np.minimum(dx, g.window.side - dx)
        d2 = d2 + dx * dx
    phis = profile.phi(np.sqrt(d2))
    is_int = np.isin(nbrs, state.interior)
    for nb, phi_v, inside in zip(nbrs, phis, is_int):
        if phi_v == 0.0:
            continue
        if inside:
            h += phi_v * state.sigma[state.interior_position(int(nb))]
        else:
            h += phi_v * state.boundary_value
    return float(h)


def _heat_bath_prob(beta: float, h: float) -> float:
    z = -2.0 * beta * h
    if z > 700.0:
        return 0.0
    if z < -700.0:
        return 1.0
    return 1.0 / (1.0 + math.exp(z))


def heat_bath_step_ising(
    state: SpinState, x: int, beta: float, u: float, profile: InteractionProfile
) -> SpinState:
    """One heat-bath update: spin up iff u < p_plus(local field); mutates state."""
    pos = state.interior_position(x)
    p = _heat_bath_prob(beta, local_field(state, profile, x))
    state.sigma[pos] = 1.0 if u < p else -1.0
    return state


def metropolis_step_continuous(
    state: SpinState,
    x: int,
    beta: float,
    width: float,
    u1: float,
    u2: float,
    measure: SingleSpinMeasure,
    profile: InteractionProfile,
) -> SpinState:
    """One random-walk Metropolis update against the single-site conditional."""
    pos = state.interior_position(x)
    h = local_field(state, profile, x)
    cur = state.sigma[pos]
    prop = cur + width * (2.0 * u1 - 1.0)
    if measure.variant == "uniform":
        if prop > measure.b or prop < -measure.b:
            return state
        logr = beta * h * (prop - cur)
    else:
        vc = measure.v4 * ((cur * cur) * (cur * cur)) + measure.v2 * (cur * cur)
        vp = measure.v4 * ((prop * prop) * (prop * prop)) + measure.v2 * (prop * prop)
        logr = beta * h * (prop - cur) + (vc - vp)
    if logr >= 0.0 or u2 < math.exp(logr):
        state.sigma[pos] = prop
    return state


@dataclass
class ChainResult:
    """Recorded observable series plus batch-means summary statistics."""

    sweeps: np.ndarray
    magnetization: np.ndarray
    energy: np.ndarray
    m_mean: float
    m_se: float
    tau_int: float
    acceptance: float
    final_sigma: np.ndarray = field(repr=False)
    subset: np.ndarray = field(repr=False)
    seed: int
    beta: float
    boundary_value: float


def batch_means(series: np.ndarray, nbatches: int = 20):
    """(mean, se, tau_int) by batch means; tau_int = 0.5 for white noise."""
    series = np.asarray(series, dtype=np.float64)
    n = series.size
    if n < 2 * nbatches:
        nbatches = max(2, n // 2)
    bs = n // nbatches
    trimmed = series[: nbatches * bs].reshape(nbatches, bs)
    bm = trimmed.mean(axis=1)
    mean = float(series.mean())
    var_bm = float(bm.var(ddof=1))
    se = math.sqrt(var_bm / nbatches)
    var_series = float(series.var(ddof=1))
    tau = bs * var_bm / (2.0 * var_series) if var_series > 0 else 0.5
    return mean, se, float(tau)


def _initial_sigma(
    measure: SingleSpinMeasure, n: int, gen, mirror: bool, init: str, boundary_value: float
) -> np.ndarray:
    if init == "aligned":
        return np.full(n, math.copysign(1.0, boundary_value) * measure.mode_value())
    u = gen.random(n)
    if mirror:
        u = 1.0 - u
    if measure.variant == "ising":
        return np.where(u < 0.5, 1.0, -1.0)
    if measure.variant == "uniform":
        return measure.b * (2.0 * u - 1.0)
    return np.zeros(n, dtype=np.float64)


def run_chain(
    graph: GilbertGraph,
    interior: np.ndarray,
    measure: SingleSpinMeasure,
    profile: InteractionProfile,
    beta: float,
    boundary_value: float,
    config: ChainConfig,
    subset: np.ndarray | None = None,
    initial: np.ndarray | None = None,
    mirror: bool = False,
) -> ChainResult:
    """Run systematic sweeps; record magnetization and energy after burn-in.

    ``mirror=True`` replays the complement of the uniform stream (u -> 1-u on
    the decision coordinate), so a run at -s with mirror set is the exact
    negation of the run at +s with the same seed.
    """
    interior = np.asarray(sorted(set(int(v) for v in np.asarray(interior).ravel())), dtype=np.int64)
    if interior.size == 0:
        raise ValueError("interior must be nonempty")
    system = _ChainSystem.build(graph, interior, profile)
    m = interior.size
    if subset is None:
        subset = interior
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise ValueError("observable subset must be nonempty")
    sub_pos = np.searchsorted(interior, subset)
    if np.any(interior[sub_pos] != subset):
        raise ValueError("observable subset must be interior")

    cfg = ChainConfig(
        beta=float(beta),
        sweeps=config.sweeps,
        burn_in=config.burn_in,
        proposal_width=config.proposal_width,
        seed=config.seed,
        thin=config.thin,
        init=config.init,
    )
    gen_init = stream(cfg.seed, "chain-init")
    gen_sweep = stream(cfg.seed, "chain-sweeps")
    if initial is not None:
        sigma = np.array(initial, dtype=np.float64).copy()
        if sigma.size != m:
            raise ValueError("initial state has wrong size")
    else:
        sigma = _initial_sigma(measure, m, gen_init, mirror, cfg.init, float(boundary_value))

    # uniforms come off one stream in sweep-major order, so splitting the run
    # into kernel calls of any length leaves the trajectory unchanged
    accepted = 0
    proposals = 0

    def advance(nsweeps: int) -> None:
        nonlocal accepted, proposals
        if nsweeps <= 0:
            return
        if measure.variant == "ising":
            u = gen_sweep.random((nsweeps, m))
            if mirror:
                u = 1.0 - u
            kernels.heat_bath_chunk(
                sigma, system.indptr, system.indices, system.weights,
                system.ext_strength, boundary_value, cfg.beta, u,
            )
        else:
            u = gen_sweep.random((nsweeps, m, 2))
            if mirror:
                u[:, :, 0] = 1.0 - u[:, :, 0]
            kind = 1 if measure.variant == "uniform" else 2
            p0 = measure.b if kind == 1 else measure.v4
            p1 = 0.0 if kind == 1 else measure.v2
            accepted += kernels.metropolis_chunk(
                sigma, system.indptr, system.indices, system.weights,
                system.ext_strength, boundary_value, cfg.beta,
                cfg.proposal_width, kind, p0, p1, u,
            )
            proposals += nsweeps * m

    rec_sweeps, rec_m, rec_e = [], [], []
    done = 0
    while done < cfg.burn_in:
        step = min(64, cfg.burn_in - done)
        advance(step)
        done += step
    while done < cfg.sweeps:
        step = min(cfg.thin, cfg.sweeps - done)
        advance(step)
        done += step
        if (done - cfg.burn_in) % cfg.thin == 0:
            rec_sweeps.append(done)
            rec_m.append(float(np.mean(sigma[sub_pos])))
            rec_e.append(system.energy(sigma, boundary_value))

    mags = np.asarray(rec_m)
    m_mean, m_se, tau = batch_means(mags) if mags.size else (0.0, 0.0, 0.5)
    return ChainResult(
        sweeps=np.asarray(rec_sweeps, dtype=np.int64),
        magnetization=mags,
        energy=np.asarray(rec_e),
        m_mean=m_mean,
        m_se=m_se,
        tau_int=tau,
        acceptance=(accepted / proposals) if proposals else 1.0,
        final_sigma=sigma,
        subset=subset,
        seed=cfg.seed,
        beta=cfg.beta,
        boundary_value=float(boundary_value),
    )


def magnetization(state: SpinState, subset: np.ndarray) -> float:
    """Arithmetic mean of the spins over ``subset`` (vertex ids, interior)."""
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise ValueError("subset must be nonempty")
    pos = [state.interior_position(int(v)) for v in subset]
    return float(np.mean(state.sigma[pos]))


def window_subset(graph: GilbertGraph, interior: np.ndarray) -> np.ndarray:
    """Interior vertices inside the central half-window (side L/2)."""
    interior = np.asarray(interior, dtype=np.int64)
    quarter = graph.window.side / 4.0
    inside = np.all(np.abs(graph.positions[interior]) <= quarter, axis=1)
    return interior[inside]


def core_subset(graph: GilbertGraph, labeling, interior: np.ndarray) -> np.ndarray:
    """Largest-component vertices in the central half-window, falling back to
    the plain half-window when the intersection is empty (tiny components)."""
    half = window_subset(graph, interior)
    if half.size == 0:
        return half
    on_largest = labeling.labels[half] == labeling.largest_label()
    return half[on_largest] if np.any(on_largest) else half


def temperedness(state: SpinState, alpha: float) -> float:
    """Weighted square-growth statistic: sum of sigma^2 exp(-alpha |x|)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    w = weight(alpha, state.graph.positions[state.interior])
    return float(np.sum(state.sigma**2 * np.atleast_1d(w)))


class EnumerationResult:
    """Exact per-vertex means from full-state enumeration, plus pair means."""

    def __init__(self, interior: np.ndarray, states: np.ndarray, weights: np.ndarray):
        self.interior = interior
        self._states = states
        self._weights = weights
        self.means = (weights @ states) / weights.sum()

    def mean_of(self, v: int) -> float:
        pos = int(np.searchsorted(self.interior, v))
        if pos >= self.interior.size or self.interior[pos] != v:
            raise ValueError(f"vertex {v} is not interior")
        return float(self.means[pos])

    def pair_mean(self, v1: int, v2: int) -> float:
        p1 = int(np.searchsorted(self.interior, v1))
        p2 = int(np.searchsorted(self.interior, v2))
        prod = self._states[:, p1] * self._states[:, p2]
        return float(np.dot(self._weights, prod) / self._weights.sum())


def exact_enumeration_ising(
    graph: GilbertGraph,
    interior: np.ndarray,
    profile: InteractionProfile,
    beta: float,
    boundary_value: float,
) -> EnumerationResult:
    """Exact two-state expectations by summing all 2^m interior states."""
    interior = np.asarray(sorted(set(int(v) for v in np.asarray(interior).ravel())), dtype=np.int64)
    m = interior.size
    if m > 16:
        raise ValueError(f"enumeration capped at 16 interior vertices, got {m}")
    (pi, pj, phi), (pb, phib), _ = _classify_edges(graph, interior, profile)
    nstates = 1 << m
    bits = (np.arange(nstates, dtype=np.int64)[:, None] >> np.arange(m)) & 1
    states = (2 * bits - 1).astype(np.float64)
    neg_energy = np.zeros(nstates, dtype=np.float64)
    for p, q, w in zip(pi, pj, phi):
        neg_energy += w * states[:, p] * states[:, q]
    field_k = np.zeros(m, dtype=np.float64)
    np.add.at(field_k, pb, phib)
    neg_energy += states @ (boundary_value * field_k)
    logw = beta * neg_energy
    weights = np.exp(logw - logw.max())
    return EnumerationResult(interior, states, weights)


def quadrature_marginals(
    graph: GilbertGraph,
    interior: np.ndarray,
    measure: SingleSpinMeasure,
    profile: InteractionProfile,
    beta: float,
    boundary_value: float,
    tol: float = 1e-8,
) -> np.ndarray:
    """Exact continuous-spin means by tensor Gauss-Legendre quadrature.

    Node counts double until all marginals move by less than ``tol``; raises
    ConvergenceError at the per-dimension cap.
    """
    if not measure.is_continuous:
        raise ValueError("quadrature oracle is for continuous measures")
    interior = np.asarray(sorted(set(int(v) for v in np.asarray(interior).ravel())), dtype=np.int64)
    m = interior.size
    if m > 3:
        raise ValueError(f"quadrature capped at 3 interior vertices, got {m}")
    (pi, pj, phi), (pb, phib), _ = _classify_edges(graph, interior, profile)
    field_k = np.zeros(m, dtype=np.float64)
    np.add.at(field_k, pb, phib)
    half = measure.support_halfwidth()
    caps = {1: 8192, 2: 1024, 3: 192}

    def marginals(nn: int) -> np.ndarray:
        x0, w0 = gauss_nodes(nn)
        x = x0 * half
        w = w0 * half
        shape = [1] * m
        logw = np.zeros((1,) * m, dtype=np.float64)
        axes = []
        for i in range(m):
            sh = shape.copy()
            sh[i] = nn
            xi = x.reshape(sh)
            axes.append(xi)
            logw = logw + measure.log_density(xi) + beta * boundary_value * field_k[i] * xi
        for p, q, cw in zip(pi, pj, phi):
            logw = logw + beta * cw * axes[p] * axes[q]
        wprod = np.ones((1,) * m)
        for i in range(m):
            sh = shape.copy()
            sh[i] = nn
            wprod = wprod * w.reshape(sh)
        val = np.exp(logw - logw.max()) * wprod
        z = val.sum()
        return np.array([float((axes[i] * val).sum() / z) for i in range(m)])

    nn = 16
    prev = marginals(nn)
    while nn < caps[m]:
        nn *= 2
        cur = marginals(nn)
        if np.max(np.abs(cur - prev)) <= tol:
            return cur
        prev = cur
    raise ConvergenceError(f"quadrature did not converge at {caps[m]} nodes per site")


def check_moment_condition(measure: SingleSpinMeasure, u: float, kappa: float) -> float:
    """Numerical value of the exp(kappa |t|^u) moment, or inf when it diverges.

    Divergence is decided by comparing the integrand growth with the tail of
    the spin law before any quadrature is attempted.
    """
    if not u > 2:
        raise ValueError("moment condition is posed for u > 2")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if measure.variant == "ising":
        return math.exp(kappa)
    if measure.variant == "density":
        diverges = u > 4 or (u == 4 and kappa >= measure.v4) or measure.v4 == 0
        if diverges:
            return math.inf
    # convergent: integrate over an enlarged truncation accounting for the
    # exp(kappa |t|^u) factor
    T = measure.support_halfwidth()
    if measure.variant == "density":

        def log_integrand(t):
            return kappa * np.abs(t) ** u + measure.log_density(t)

        peak = float(np.max(log_integrand(np.linspace(0, T, 1001))))
        while log_integrand(np.array([T]))[0] > peak - 40.0:
            T *= 1.5
    x0, w0 = gauss_nodes(4096)
    x = x0 * T
    w = w0 * T
    if measure.variant == "uniform":
        inside = np.abs(x) <= measure.b
        num = float(np.sum(w[inside] * np.exp(kappa * np.abs(x[inside]) ** u)))
        return num / (2.0 * measure.b)
    rho = np.exp(measure.log_density(x))
    return float(np.sum(w * np.exp(kappa * np.abs(x) ** u) * rho) / np.sum(w * rho))


def write_chain_csv(path, result: ChainResult) -> None:
    """Chain series CSV: sweep,magnetization,energy."""
    lines = ["sweep,magnetization,energy"]
    for t, mv, ev in zip(result.sweeps, result.magnetization, result.energy):
        lines.append(f"{t},{mv!r},{ev!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
