"""Experiment orchestration: configs, seeded sweeps, manifests.

Every experiment is fully specified by one flat key-value config (TOML). The
runners derive all randomness from the master seed with purpose-tagged
substreams, funnel results through index-ordered aggregation, and write
manifests with content hashes, so a re-run reproduces every data file byte
for byte regardless of the worker count.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, percolation, svgplot
from .geomgraph import (
    build_graph,
    expected_a_bound,
    sparsity_functionals,
    weight,
    write_edges,
)
from .percolation import (
    NoCrossingError,
    beta_star_bound,
    compute_q_star_bound,
    connected_components,
    spans,
    write_threshold_csv,
    write_threshold_json,
)
from .pointprocess import (
    BoxWindow,
    ball_volume,
    expected_isolated_count,
    sample_poisson,
    write_points,
)
from .rng import substream_seed
from .spinsystem import (
    ChainConfig,
    InteractionProfile,
    SingleSpinMeasure,
    gauss_nodes,
    run_chain,
    window_subset,
    write_chain_csv,
)
from .wells import (
    find_a,
    finite_volume_wells_check,
    verify_one_site_positivity,
    write_certificate_json,
)

__all__ = [
    "ExperimentConfig",
    "RunManifest",
    "PhaseDiagramResult",
    "ConfigError",
    "load_config",
    "run_experiment",
    "run_phase_diagram",
    "run_sparsity_report",
    "run_chain_experiment",
    "run_percolation_sweep",
    "run_wells_suite",
    "window_weight_integral",
]

EXPERIMENT_KINDS = ("percolation-sweep", "chain", "phase-diagram", "wells-suite", "sparsity-report")


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


def _canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated flat config; ``raw`` is exactly what determines the run."""

    kind: str
    raw: dict

    def __getitem__(self, key):
        if key not in self.raw:
            raise ConfigError(f"missing config key {key!r} for experiment {self.kind!r}")
        return self.raw[key]

    def get(self, key, default=None):
        return self.raw.get(key, default)

    @property
    def seed(self) -> int:
        return int(self["seed"])

    @property
    def threads(self) -> int:
        return int(self.get("threads", 1))

    def hash(self) -> str:
        return hashlib.sha256(_canonical_json(self.raw).encode()).hexdigest()

    def measure(self) -> SingleSpinMeasure:
        name = self["measure"]
        if name == "ising":
            return SingleSpinMeasure("ising")
        if name == "uniform":
            return SingleSpinMeasure("uniform", b=float(self.get("b", 1.0)))
        if name == "density":
            return SingleSpinMeasure(
                "density", v4=float(self.get("v4", 1.0)), v2=float(self.get("v2", -2.0))
            )
        raise ConfigError(f"unknown measure {name!r}")

    def profile(self) -> InteractionProfile:
        peak = self.get("profile_peak")
        return InteractionProfile(
            phi_star=float(self.get("phi_star", 1.0)),
            r_star=float(self["rstar"]),
            shape=self.get("profile", "constant"),
            peak=None if peak is None else float(peak),
        )


def make_config(raw: dict) -> ExperimentConfig:
    if "experiment" not in raw:
        raise ConfigError("config must set 'experiment'")
    kind = raw["experiment"]
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {EXPERIMENT_KINDS}")
    if "seed" not in raw:
        raise ConfigError("config must set 'seed'")
    if int(raw.get("replicates", 1)) < 1:
        raise ConfigError("replicates must be >= 1")
    for key, value in raw.items():
        if key.endswith("_grid") or key in ("sizes", "grid"):
            arr = list(value)
            if len(arr) == 0 or any(b <= a for a, b in zip(arr, arr[1:])):
                raise ConfigError(f"{key} must be strictly increasing and nonempty")
    return ExperimentConfig(kind=kind, raw=dict(raw))


def load_config(path) -> ExperimentConfig:
    try:
        import tomllib
    except ImportError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return make_config(raw)


@dataclass
class RunManifest:
    config: dict
    config_hash: str
    artifact_version: str
    seeds: dict
    wall_clock_s: float
    outputs: list = field(default_factory=list)

    def add_output(self, path: Path, root: Path) -> None:
        self.outputs.append(
            {
                "path": str(path.relative_to(root)),
                "sha256": _sha256_file(path),
                "bytes": path.stat().st_size,
            }
        )

    def write(self, path: Path) -> None:
        payload = {
            "config": self.config,
            "config_hash": self.config_hash,
            "artifact_version": self.artifact_version,
            "seeds": self.seeds,
            "wall_clock_s": self.wall_clock_s,
            "outputs": sorted(self.outputs, key=lambda o: o["path"]),
        }
        write_json(path, payload)


def _new_manifest(config: ExperimentConfig, seeds: dict) -> RunManifest:
    seeds = dict(seeds)
    seeds.setdefault("master", config.seed)
    seeds.setdefault("derivation", "sha256 of repr((master, *tags)) keys a Philox substream")
    return RunManifest(
        config=dict(config.raw),
        config_hash=config.hash(),
        artifact_version=__version__,
        seeds=seeds,
        wall_clock_s=0.0,
    )


def _pmap(fn, payloads, threads: int):
    """Order-preserving map; a process pool when threads > 1.

    Tasks are pure functions of their payload (all randomness is key-derived),
    so the result list is identical for any worker count.
    """
    payloads = list(payloads)
    if threads <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, payloads, chunksize=1))


def window_weight_integral(alpha: float, window: BoxWindow, nodes: int = 512) -> float:
    """Integral of exp(-alpha |x|) over the box window, by tensor quadrature.

    Accuracy is limited by the |x| kink at the origin (~1e-5 relative), which
    is orders of magnitude inside the statistical bands it is compared to.
    """
    if window.dim == 3:
        nodes = min(nodes, 128)
    x, w = gauss_nodes(nodes)
    half = window.side / 2.0
    t = x * half
    ww = w * half
    if window.dim == 2:
        r2 = t[:, None] ** 2 + t[None, :] ** 2
        wprod = ww[:, None] * ww[None, :]
    else:
        r2 = t[:, None, None] ** 2 + t[None, :, None] ** 2 + t[None, None, :] ** 2
        wprod = ww[:, None, None] * ww[None, :, None] * ww[None, None, :]
    return float(np.sum(wprod * np.exp(-alpha * np.sqrt(r2))))


# ---------------------------------------------------------------------------
# sparsity report


def _sparsity_task(payload) -> dict:
    (master, rep, dim, side, lam, rstar, alpha, theta) = payload
    window = BoxWindow(dim=dim, side=side, boundary_mode="torus")
    pts = sample_poisson(lam, window, substream_seed(master, "sparsity", rep))
    graph = build_graph(pts, rstar)
    rpt = sparsity_functionals(graph, alpha, theta)
    degrees = graph.degrees
    return {
        "replicate": rep,
        "n": graph.n,
        "edges": graph.n_edges,
        "max_degree": rpt.max_degree,
        "mean_degree": rpt.mean_degree,
        "a_gamma": rpt.a_gamma,
        "b_gamma": rpt.b_gamma,
        "isolated": int(np.sum(degrees == 0)) if graph.n else 0,
    }


def run_sparsity_report(config: ExperimentConfig, outdir: Path) -> dict:
    t0 = time.perf_counter()
    outdir = Path(outdir)
    (outdir / "sweeps").mkdir(parents=True, exist_ok=True)
    dim = int(config["dim"])
    side = float(config["side"])
    lam = float(config["lambda"])
    rstar = float(config["rstar"])
    alpha = float(config.get("alpha", 1.0))
    theta = float(config.get("theta", 1.0))
    reps = int(config["replicates"])

    rows = _pmap(
        _sparsity_task,
        [(config.seed, r, dim, side, lam, rstar, alpha, theta) for r in range(reps)],
        config.threads,
    )

    csv_path = outdir / "sweeps" / "sparsity.csv"
    header = "replicate,n,edges,max_degree,mean_degree,a_gamma,b_gamma,isolated"
    lines = [header]
    for row in rows:
        lines.append(
            f"{row['replicate']},{row['n']},{row['edges']},{row['max_degree']},"
            f"{row['mean_degree']!r},{row['a_gamma']!r},{row['b_gamma']!r},{row['isolated']}"
        )
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    window = BoxWindow(dim=dim, side=side, boundary_mode="torus")
    a_vals = np.array([r["a_gamma"] for r in rows])
    b_vals = np.array([r["b_gamma"] for r in rows])
    iso_vals = np.array([r["isolated"] for r in rows], dtype=float)
    deg_vals = np.array([r["mean_degree"] for r in rows])
    bound = expected_a_bound(lam, alpha, theta, rstar, dim)
    b_expect = lam * window_weight_integral(alpha, window)
    iso_expect = expected_isolated_count(lam, rstar, window)
    deg_expect = lam * ball_volume(dim, rstar)

    def _se(v):
        return float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0

    aggregate = {
        "a_gamma_mean": float(a_vals.mean()),
        "a_gamma_se": _se(a_vals),
        "a_gamma_bound": bound,
        "a_bound_satisfied": bool(a_vals.mean() <= bound + 3 * _se(a_vals)),
        "b_gamma_mean": float(b_vals.mean()),
        "b_gamma_se": _se(b_vals),
        "b_gamma_expected": b_expect,
        "b_within_3se": bool(abs(b_vals.mean() - b_expect) <= 3 * max(_se(b_vals), 1e-12)),
        "isolated_mean": float(iso_vals.mean()),
        "isolated_se": _se(iso_vals),
        "isolated_expected": iso_expect,
        "isolated_within_3se": bool(
            abs(iso_vals.mean() - iso_expect) <= 3 * max(_se(iso_vals), 1e-12)
        ),
        "mean_degree_mean": float(deg_vals.mean()),
        "mean_degree_se": _se(deg_vals),
        "mean_degree_expected": deg_expect,
        "mean_degree_within_3se": bool(
            abs(deg_vals.mean() - deg_expect) <= 3 * max(_se(deg_vals), 1e-12)
        ),
        "replicates": reps,
    }
    json_path = outdir / "sparsity_aggregate.json"
    write_json(json_path, aggregate)

    manifest = _new_manifest(config, {"sparsity[rep]": "substream_seed(master, 'sparsity', rep)"})
    manifest.add_output(csv_path, outdir)
    manifest.add_output(json_path, outdir)
    manifest.wall_clock_s = time.perf_counter() - t0
    manifest.write(outdir / "manifest.json")
    return aggregate


# ---------------------------------------------------------------------------
# chain experiment


def _collar_interior(graph, margin: float) -> np.ndarray:
    inner = graph.window.side / 2.0 - margin
    if inner <= 0:
        raise ConfigError("margin leaves no interior")
    mask = np.all(np.abs(graph.positions) <= inner, axis=1)
    return np.nonzero(mask)[0].astype(np.int64)


def _select_subset(config, graph, interior) -> np.ndarray:
    mode = config.get("subset", "core")
    if mode == "window":
        sub = window_subset(graph, interior)
    elif mode == "core":
        from .spinsystem import core_subset

        sub = core_subset(graph, connected_components(graph), interior)
    elif mode == "interior":
        sub = interior
    else:
        raise ConfigError(f"unknown subset mode {mode!r}")
    if sub.size == 0:
        raise ConfigError("observable subset is empty; configuration too sparse for this subset")
    return sub


def run_chain_experiment(config: ExperimentConfig, outdir: Path) -> dict:
    t0 = time.perf_counter()
    outdir = Path(outdir)
    for sub in ("points", "graphs", "sweeps"):
        (outdir / sub).mkdir(parents=True, exist_ok=True)
    dim = int(config["dim"])
    side = float(config["side"])
    lam = float(config["lambda"])
    rstar = float(config["rstar"])
    margin = float(config.get("margin", rstar))
    if margin < rstar:
        raise ConfigError("collar margin must be >= rstar")
    window = BoxWindow(dim=dim, side=side, boundary_mode="free")
    pts = sample_poisson(lam, window, substream_seed(config.seed, "chain-points"))
    graph = build_graph(pts, rstar)
    interior = _collar_interior(graph, margin)
    if interior.size == 0:
        raise ConfigError("no interior vertices; enlarge the window or the intensity")
    subset = _select_subset(config, graph, interior)
    measure = config.measure()
    profile = config.profile()
    beta = float(config["beta"])
    s = float(config.get("boundary_spin", 1.0))
    chain_cfg = ChainConfig(
        beta=beta,
        sweeps=int(config["sweeps"]),
        burn_in=int(config.get("burn_in", 0)),
        proposal_width=float(config.get("proposal_width", 1.0)),
        seed=substream_seed(config.seed, "chain-run"),
        thin=int(config.get("thin", 1)),
        init=config.get("init", "measure"),
    )
    result = run_chain(graph, interior, measure, profile, beta, s, chain_cfg, subset=subset)

    points_path = outdir / "points" / "points.csv"
    write_points(points_path, pts)
    edges_path = outdir / "graphs" / "edges.csv"
    write_edges(edges_path, graph)
    chain_path = outdir / "sweeps" / "chain.csv"
    write_chain_csv(chain_path, result)
    summary = {
        "beta": beta,
        "lambda": lam,
        "s": s,
        "m_mean": result.m_mean,
        "m_se": result.m_se,
        "tau_int": result.tau_int,
        "acceptance": result.acceptance,
        "n_interior": int(interior.size),
        "n_subset": int(subset.size),
        "reliable": bool(result.tau_int <= chain_cfg.sweeps / 50),
        "seeds": {"master": config.seed, "chain": chain_cfg.seed},
    }
    summary_path = outdir / "chain_summary.json"
    write_json(summary_path, summary)

    manifest = _new_manifest(config, {"chain": chain_cfg.seed})
    for p in (points_path, edges_path, chain_path, summary_path):
        manifest.add_output(p, outdir)
    manifest.wall_clock_s = time.perf_counter() - t0
    manifest.write(outdir / "manifest.json")
    return summary


# ---------------------------------------------------------------------------
# phase diagram


@dataclass
class PhaseDiagramResult:
    """Aggregated magnetization table over the (lambda, beta) grid."""

    cells: list  # dict per (lambda, beta): means, ses, tau, reliable
    onset_beta: dict  # lambda -> beta or None
    beta_star: dict  # lambda -> closed-form sufficient bound or None
    replicate_rows: list


def _phase_task(payload) -> dict:
    (
        master, li, bi, rep, dim, side, lam, rstar, margin, beta,
        measure_key, profile_key, a, sweeps, burn_in, thin, width, subset_mode, init,
    ) = payload
    measure = SingleSpinMeasure(measure_key[0], b=measure_key[1], v4=measure_key[2], v2=measure_key[3])
    profile = InteractionProfile(
        phi_star=profile_key[0], r_star=profile_key[1], shape=profile_key[2], peak=profile_key[3]
    )
    window = BoxWindow(dim=dim, side=side, boundary_mode="free")
    pts = sample_poisson(lam, window, substream_seed(master, "phase-points", li, rep))
    graph = build_graph(pts, rstar)
    inner = side / 2.0 - margin
    interior = np.nonzero(np.all(np.abs(graph.positions) <= inner, axis=1))[0].astype(np.int64)
    if interior.size == 0:
        return {"li": li, "bi": bi, "rep": rep, "empty": True}
    labeling = connected_components(graph)
    if subset_mode == "window":
        subset = window_subset(graph, interior)
    else:
        from .spinsystem import core_subset

        subset = core_subset(graph, labeling, interior)
    if subset.size == 0:
        return {"li": li, "bi": bi, "rep": rep, "empty": True}
    cfg = ChainConfig(
        beta=beta,
        sweeps=sweeps,
        burn_in=burn_in,
        proposal_width=width,
        seed=substream_seed(master, "phase-chain", li, bi, rep),
        thin=thin,
        init=init,
    )
    plus = run_chain(graph, interior, measure, profile, beta, +a, cfg, subset=subset)
    minus = run_chain(graph, interior, measure, profile, beta, -a, cfg, subset=subset, mirror=True)
    return {
        "li": li,
        "bi": bi,
        "rep": rep,
        "empty": False,
        "n_interior": int(interior.size),
        "n_subset": int(subset.size),
        "m_plus": plus.m_mean,
        "m_minus": minus.m_mean,
        "se_plus": plus.m_se,
        "se_minus": minus.m_se,
        "tau_plus": plus.tau_int,
        "tau_minus": minus.tau_int,
    }


def _spanning_prepass(config: ExperimentConfig, lam: float) -> float:
    dim = int(config["dim"])
    side = float(config["side"])
    rstar = float(config["rstar"])
    window = BoxWindow(dim=dim, side=side, boundary_mode="free")
    reps = int(config.get("prepass_replicates", 8))
    hits = 0
    for rep in range(reps):
        pts = sample_poisson(lam, window, substream_seed(config.seed, "prepass", rep))
        graph = build_graph(pts, rstar)
        if spans(graph, connected_components(graph), axis=0):
            hits += 1
    return hits / reps


def run_phase_diagram(config: ExperimentConfig, outdir: Path) -> PhaseDiagramResult:
    t0 = time.perf_counter()
    outdir = Path(outdir)
    (outdir / "sweeps").mkdir(parents=True, exist_ok=True)
    lambdas = [float(v) for v in config["lambda_grid"]]
    betas = [float(v) for v in config["beta_grid"]]
    reps = int(config["replicates"])
    measure = config.measure()
    profile = config.profile()

    if config.get("a") is not None:
        a = float(config["a"])
    elif measure.variant == "ising":
        a = 1.0
    else:
        a = find_a(measure).usable

    if config.get("require_supercritical", True):
        frac = _spanning_prepass(config, max(lambdas))
        if frac < 0.5:
            raise NoCrossingError(
                f"lambda grid appears subcritical: spanning fraction {frac:.2f} "
                "at the largest intensity (set require_supercritical=false to override)"
            )

    measure_key = (measure.variant, measure.b, measure.v4, measure.v2)
    profile_key = (profile.phi_star, profile.r_star, profile.shape, profile.peak)
    payloads = [
        (
            config.seed, li, bi, rep, int(config["dim"]), float(config["side"]),
            lambdas[li], float(config["rstar"]), float(config.get("margin", config["rstar"])),
            betas[bi], measure_key, profile_key, a, int(config["sweeps"]),
            int(config.get("burn_in", 0)), int(config.get("thin", 1)),
            float(config.get("proposal_width", 1.0)), config.get("subset", "core"),
            config.get("init", "aligned"),
        )
        for li in range(len(lambdas))
        for bi in range(len(betas))
        for rep in range(reps)
    ]
    rows = _pmap(_phase_task, payloads, config.threads)

    cells = []
    onset: dict[str, float | None] = {}
    bstar: dict[str, float | None] = {}
    sweeps_count = int(config["sweeps"])
    lambda_star_hat = config.get("lambda_star_hat")
    for li, lam in enumerate(lambdas):
        onset[repr(lam)] = None
        if lambda_star_hat is not None and lam > float(lambda_star_hat):
            q = compute_q_star_bound(lam, float(lambda_star_hat))
            if q < 1.0:
                bstar[repr(lam)] = beta_star_bound(q, profile.phi_star, a)
            else:
                bstar[repr(lam)] = None
        else:
            bstar[repr(lam)] = None
        for bi, beta in enumerate(betas):
            sub = [r for r in rows if r["li"] == li and r["bi"] == bi and not r.get("empty")]
            if not sub:
                cells.append({"lambda": lam, "beta": beta, "replicates": 0, "empty": True})
                continue
            mp = np.array([r["m_plus"] for r in sub])
            mm = np.array([r["m_minus"] for r in sub])
            taus = np.array([r["tau_plus"] for r in sub])
            se_p = float(mp.std(ddof=1) / math.sqrt(len(mp))) if len(mp) > 1 else float(sub[0]["se_plus"])
            se_m = float(mm.std(ddof=1) / math.sqrt(len(mm))) if len(mm) > 1 else float(sub[0]["se_minus"])
            diff = float(mp.mean() - mm.mean())
            joint = math.sqrt(se_p**2 + se_m**2)
            cell = {
                "lambda": lam,
                "beta": beta,
                "replicates": len(sub),
                "m_plus_mean": float(mp.mean()),
                "m_plus_se": se_p,
                "m_minus_mean": float(mm.mean()),
                "m_minus_se": se_m,
                "diff": diff,
                "joint_se": joint,
                "tau_int_mean": float(taus.mean()),
                "reliable": bool(np.all(taus <= sweeps_count / 50)),
                "transition_evidence": bool(diff > 3 * joint),
            }
            cells.append(cell)
            if cell["transition_evidence"] and onset[repr(lam)] is None:
                onset[repr(lam)] = beta

    csv_path = outdir / "sweeps" / "phase_diagram.csv"
    lines = [
        "lambda,beta,replicate,n_interior,n_subset,m_plus,m_minus,se_plus,se_minus,tau_plus,tau_minus"
    ]
    for r in rows:
        if r.get("empty"):
            continue
        lines.append(
            f"{lambdas[r['li']]!r},{betas[r['bi']]!r},{r['rep']},{r['n_interior']},{r['n_subset']},"
            f"{r['m_plus']!r},{r['m_minus']!r},{r['se_plus']!r},{r['se_minus']!r},"
            f"{r['tau_plus']!r},{r['tau_minus']!r}"
        )
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    result = PhaseDiagramResult(cells=cells, onset_beta=onset, beta_star=bstar, replicate_rows=rows)
    agg_path = outdir / "phase_diagram.json"
    write_json(
        agg_path,
        {
            "a": a,
            "cells": cells,
            "onset_beta": onset,
            "beta_star_bound": bstar,
            "lambda_star_hat": lambda_star_hat,
        },
    )
    outputs = [csv_path, agg_path]
    if config.get("plots", False):
        svg_path = outdir / "sweeps" / "phase_diagram.svg"
        series = []
        for li, lam in enumerate(lambdas):
            pts = [
                (c["beta"], c["m_plus_mean"])
                for c in cells
                if c.get("m_plus_mean") is not None and c["lambda"] == lam
            ]
            series.append(
                {"label": f"lambda={lam:.4g}", "x": [p[0] for p in pts], "y": [p[1] for p in pts]}
            )
        svgplot.line_chart(svg_path, series, "beta", "m(+a)", "boundary magnetization")
        outputs.append(svg_path)

    manifest = _new_manifest(
        config,
        {
            "phase-points[li,rep]": "substream_seed(master, 'phase-points', li, rep)",
            "phase-chain[li,bi,rep]": "substream_seed(master, 'phase-chain', li, bi, rep)",
            "a": a,
        },
    )
    for p in outputs:
        manifest.add_output(p, outdir)
    manifest.wall_clock_s = time.perf_counter() - t0
    manifest.write(outdir / "manifest.json")
    return result


# ---------------------------------------------------------------------------
# percolation sweep


def run_percolation_sweep(config: ExperimentConfig, outdir: Path):
    t0 = time.perf_counter()
    outdir = Path(outdir)
    (outdir / "sweeps").mkdir(parents=True, exist_ok=True)
    estimate = config.get("estimate", "lambda-star")
    sizes = [float(v) for v in config["sizes"]]
    grid = [float(v) for v in config["grid"]]
    reps = int(config["replicates"])
    boot = int(config.get("bootstrap", 200))
    if estimate == "lambda-star":
        est = percolation.estimate_lambda_star(
            r_star=float(config["rstar"]),
            d=int(config["dim"]),
            sizes=sizes,
            lambda_grid=grid,
            replicates=reps,
            seed=config.seed,
            bootstrap=boot,
        )
    elif estimate == "q-star":
        est = percolation.estimate_q_star_empirical(
            lam=float(config["lambda"]),
            r_star=float(config["rstar"]),
            d=int(config["dim"]),
            sizes=sizes,
            q_grid=grid,
            replicates=reps,
            seed=config.seed,
            bootstrap=boot,
        )
    else:
        raise ConfigError(f"unknown estimate kind {estimate!r}")

    csv_path = outdir / "sweeps" / "threshold.csv"
    write_threshold_csv(csv_path, est)
    json_path = outdir / "threshold.json"
    write_threshold_json(json_path, est)
    outputs = [csv_path, json_path]
    if config.get("plots", False):
        svg_path = outdir / "sweeps" / "threshold.svg"
        series = [
            {"label": f"L={c['L']:.4g}", "x": c["params"], "y": c["probs"]} for c in est.curves
        ]
        svgplot.line_chart(svg_path, series, est.parameter_name, "spanning probability", "")
        outputs.append(svg_path)

    manifest = _new_manifest(config, {"cells": "substream_seed(master, purpose, li, pi, rep)"})
    for p in outputs:
        manifest.add_output(p, outdir)
    manifest.wall_clock_s = time.perf_counter() - t0
    manifest.write(outdir / "manifest.json")
    return est


# ---------------------------------------------------------------------------
# wells suite


def run_wells_suite(config: ExperimentConfig, outdir: Path) -> dict:
    t0 = time.perf_counter()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    names = config.get("measures", ["ising", "uniform", "density"])
    max_exp = int(config.get("max_exponent", 8))
    tol = float(config.get("tol", 1e-9))
    instances = int(config.get("instances", 10))
    rstar = float(config.get("rstar", 1.0))
    profile = InteractionProfile(
        phi_star=float(config.get("phi_star", 1.0)), r_star=rstar,
        shape=config.get("profile", "constant"),
    )
    summary = {}
    outputs = []
    for name in names:
        if name == "ising":
            measure = SingleSpinMeasure("ising")
        elif name == "uniform":
            measure = SingleSpinMeasure("uniform", b=float(config.get("b", 1.0)))
        else:
            measure = SingleSpinMeasure(
                "density", v4=float(config.get("v4", 1.0)), v2=float(config.get("v2", -2.0))
            )
        res = find_a(measure)
        a = res.usable
        cert = verify_one_site_positivity(measure, a, max_exp, tol=tol)
        cert_path = outdir / f"certificate_{name}.json"
        write_certificate_json(cert_path, cert)
        outputs.append(cert_path)
        checks = 0
        failures = 0
        for inst in range(instances):
            gen = np.random.default_rng(substream_seed(config.seed, "wells-instance", name, inst))
            n_sites = int(gen.integers(1, 3 if measure.is_continuous else 6))
            n_total = n_sites + int(gen.integers(1, 4))
            pos = gen.uniform(-1.5 * rstar, 1.5 * rstar, size=(n_total, 2))
            window = BoxWindow(dim=2, side=8.0 * rstar, boundary_mode="free")
            from .pointprocess import PointConfiguration

            pc = PointConfiguration(window=window, points=pos, intensity=1.0, seed=0)
            graph = build_graph(pc, rstar)
            beta = float(gen.uniform(0.1, 2.0))
            _, _, holds = finite_volume_wells_check(
                graph, np.arange(n_sites), measure, profile, a, beta, tol=1e-8
            )
            checks += 1
            failures += 0 if holds else 1
        summary[name] = {
            "a": res.a,
            "attained": res.attained,
            "a_used": a,
            "all_nonnegative": cert.all_nonnegative,
            "min_integral": cert.min_integral,
            "finite_volume_checks": checks,
            "finite_volume_failures": failures,
        }
    summary_path = outdir / "wells_summary.json"
    write_json(summary_path, summary)
    outputs.append(summary_path)

    manifest = _new_manifest(config, {})
    for p in outputs:
        manifest.add_output(p, outdir)
    manifest.wall_clock_s = time.perf_counter() - t0
    manifest.write(outdir / "manifest.json")
    return summary


def run_experiment(config: ExperimentConfig, outdir: Path):
    """Dispatch on the experiment kind; every runner writes its own manifest."""
    runners = {
        "sparsity-report": run_sparsity_report,
        "chain": run_chain_experiment,
        "phase-diagram": run_phase_diagram,
        "percolation-sweep": run_percolation_sweep,
        "wells-suite": run_wells_suite,
    }
    return runners[config.kind](config, Path(outdir))
