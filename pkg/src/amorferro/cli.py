"""Command-line interface.

Subcommands: gen, graph, percolate, thin, chain, sweep, wells, report.
Exit codes: 0 success, 1 invalid configuration or usage, 2 runtime failure,
3 failed acceptance checks (report --check).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__, harness
from .geomgraph import brute_force_graph, build_graph, graph_from_edges, read_edges, write_edges
from .harness import ConfigError, RunManifest, load_config, make_config
from .percolation import NoCrossingError, bernoulli_thin
from .pointprocess import BoxWindow, read_points, sample_poisson, write_points


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors, per the CLI contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _single_file_manifest(out_path: Path, command: str, flags: dict) -> None:
    manifest = RunManifest(
        config={"command": command, **flags},
        config_hash="",
        artifact_version=__version__,
        seeds={"master": flags.get("seed", 0)},
        wall_clock_s=0.0,
    )
    import hashlib
    import json

    manifest.config_hash = hashlib.sha256(
        json.dumps(manifest.config, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()
    manifest.add_output(out_path, out_path.parent)
    manifest.write(Path(str(out_path) + ".manifest.json"))


def _cmd_gen(args) -> int:
    window = BoxWindow(dim=args.dim, side=args.side, boundary_mode=args.boundary)
    t0 = time.perf_counter()
    pts = sample_poisson(args.lam, window, args.seed)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_points(out, pts)
    flags = {
        "lambda": args.lam,
        "dim": args.dim,
        "side": args.side,
        "seed": args.seed,
        "boundary": args.boundary,
        "wall_clock_s": time.perf_counter() - t0,
    }
    _single_file_manifest(out, "gen", flags)
    print(f"wrote {pts.n} points to {out}")
    return 0


def _cmd_graph(args) -> int:
    pts = read_points(args.points)
    builder = brute_force_graph if args.brute else build_graph
    graph = builder(pts, args.rstar)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_edges(out, graph)
    _single_file_manifest(
        out, "graph", {"points": str(args.points), "rstar": args.rstar, "brute": args.brute}
    )
    print(f"wrote {graph.n_edges} edges to {out}")
    return 0


def _cmd_thin(args) -> int:
    pts = read_points(args.points)
    n, rstar, ei, ej = read_edges(args.edges)
    if n != pts.n:
        raise ConfigError(f"edge file is for n={n} but point file has n={pts.n}")
    graph = graph_from_edges(pts.window, pts.points, rstar, ei, ej)
    thinned = bernoulli_thin(graph, args.q, args.seed)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_edges(out, thinned)
    _single_file_manifest(
        out,
        "thin",
        {"points": str(args.points), "edges": str(args.edges), "q": args.q, "seed": args.seed},
    )
    print(f"kept {thinned.n_edges} of {graph.n_edges} edges -> {out}")
    return 0


def _cmd_percolate(args) -> int:
    raw = {
        "experiment": "percolation-sweep",
        "estimate": args.estimate,
        "dim": args.dim,
        "rstar": args.rstar,
        "sizes": [float(v) for v in args.sizes.split(",")],
        "grid": [float(v) for v in args.grid.split(",")],
        "replicates": args.replicates,
        "bootstrap": args.bootstrap,
        "seed": args.seed,
        "threads": args.threads,
        "plots": args.plots,
    }
    if args.lam is not None:
        raw["lambda"] = args.lam
    config = make_config(raw)
    est = harness.run_percolation_sweep(config, Path(args.output))
    print(
        f"{est.parameter_name} estimate: {est.estimate:.6g} "
        f"[{est.ci_low:.6g}, {est.ci_high:.6g}]"
    )
    return 0


def _config_command(args, kind: str):
    config = load_config(args.config)
    if config.kind != kind:
        raise ConfigError(f"config declares experiment {config.kind!r}; expected {kind!r}")
    raw = dict(config.raw)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.threads is not None:
        raw["threads"] = args.threads
    return make_config(raw)


def _cmd_chain(args) -> int:
    config = _config_command(args, "chain")
    summary = harness.run_chain_experiment(config, Path(args.output))
    print(f"m = {summary['m_mean']:.6g} +- {summary['m_se']:.2g} (tau {summary['tau_int']:.3g})")
    return 0


def _cmd_sweep(args) -> int:
    config = _config_command(args, "phase-diagram")
    result = harness.run_phase_diagram(config, Path(args.output))
    for lam, beta in result.onset_beta.items():
        bound = result.beta_star[lam]
        bound_txt = f"{bound:.4g}" if bound is not None else "n/a"
        print(f"lambda={lam}: onset beta={beta}, sufficient bound={bound_txt}")
    return 0


def _cmd_wells(args) -> int:
    if args.config:
        config = _config_command(args, "wells-suite")
    else:
        config = make_config({"experiment": "wells-suite", "seed": args.seed or 0})
    summary = harness.run_wells_suite(config, Path(args.output))
    for name, row in summary.items():
        print(
            f"{name}: a={row['a']:.8g} attained={row['attained']} "
            f"nonneg={row['all_nonnegative']} fv_failures={row['finite_volume_failures']}"
        )
    return 0


def _cmd_report(args) -> int:
    config = _config_command(args, "sparsity-report")
    aggregate = harness.run_sparsity_report(config, Path(args.output))
    print(
        f"a_gamma mean {aggregate['a_gamma_mean']:.6g} vs bound {aggregate['a_gamma_bound']:.6g}; "
        f"b_gamma mean {aggregate['b_gamma_mean']:.6g} vs {aggregate['b_gamma_expected']:.6g}"
    )
    if args.check:
        checks = [
            "a_bound_satisfied",
            "b_within_3se",
            "isolated_within_3se",
            "mean_degree_within_3se",
        ]
        failed = [c for c in checks if not aggregate[c]]
        if failed:
            sys.stderr.write(f"acceptance checks failed: {', '.join(failed)}\n")
            return 3
        print("all report checks passed")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="amorferro", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="sample a Poisson point configuration")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="intensity")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--side", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--boundary", choices=("free", "torus"), default="free")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("graph", help="build the fixed-radius graph from a point file")
    p.add_argument("--points", required=True)
    p.add_argument("--rstar", type=float, required=True)
    p.add_argument("--brute", action="store_true", help="use the O(n^2) oracle builder")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=_cmd_graph)

    p = sub.add_parser("thin", help="Bernoulli-thin an edge list")
    p.add_argument("--points", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=_cmd_thin)

    p = sub.add_parser("percolate", help="finite-size-scaling threshold estimate")
    p.add_argument("--estimate", choices=("lambda-star", "q-star"), default="lambda-star")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--rstar", type=float, required=True)
    p.add_argument("--sizes", required=True, help="comma-separated box sides")
    p.add_argument("--grid", required=True, help="comma-separated parameter grid")
    p.add_argument("--lambda", dest="lam", type=float, help="intensity (q-star only)")
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--bootstrap", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--plots", action="store_true")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=_cmd_percolate)

    for name, fn, kind in (
        ("chain", _cmd_chain, "single finite-volume Gibbs chain"),
        ("sweep", _cmd_sweep, "phase-diagram sweep over (lambda, beta)"),
        ("report", _cmd_report, "sparsity / exchange-formula report"),
    ):
        p = sub.add_parser(name, help=kind)
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument("--threads", type=int, help="override worker count")
        p.add_argument("-o", "--output", required=True, help="output directory")
        if name == "report":
            p.add_argument("--check", action="store_true", help="exit 3 unless checks pass")
        p.set_defaults(fn=fn)

    p = sub.add_parser("wells", help="entry-condition and one-site certificates")
    p.add_argument("--config", help="TOML experiment config (optional)")
    p.add_argument("--seed", type=int, help="override config seed")
    p.add_argument("--threads", type=int, help="override worker count")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(fn=_cmd_wells)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValueError) as err:
        sys.stderr.write(f"invalid configuration: {err}\n")
        return 1
    except NoCrossingError as err:
        sys.stderr.write(f"diagnostic failure: {err}\n")
        return 2
    except OSError as err:
        sys.stderr.write(f"runtime failure: {err}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
