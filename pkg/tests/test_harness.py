import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from amorferro.cli import main as cli_main
from amorferro.harness import (
    ConfigError,
    load_config,
    make_config,
    run_chain_experiment,
    run_phase_diagram,
    run_sparsity_report,
    window_weight_integral,
)
from amorferro.pointprocess import BoxWindow


def _run_cli(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "amorferro.cli", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
    )


def test_gen_graph_thin_pipeline(tmp_path):
    assert cli_main([
        "gen", "--lambda", "1", "--dim", "2", "--side", "16", "--seed", "7",
        "-o", str(tmp_path / "pts.csv"),
    ]) == 0
    text = (tmp_path / "pts.csv").read_text().splitlines()
    assert text[0] == "# dim=2"
    assert text[1] == "# side=16.0"
    assert text[2] == "# lambda=1.0"
    assert text[3] == "# seed=7"
    assert text[4] == "# boundary=free"
    assert (tmp_path / "pts.csv.manifest.json").exists()

    assert cli_main([
        "graph", "--points", str(tmp_path / "pts.csv"), "--rstar", "1",
        "-o", str(tmp_path / "edges.csv"),
    ]) == 0
    assert cli_main([
        "graph", "--points", str(tmp_path / "pts.csv"), "--rstar", "1", "--brute",
        "-o", str(tmp_path / "edges_brute.csv"),
    ]) == 0
    assert (tmp_path / "edges.csv").read_bytes() == (tmp_path / "edges_brute.csv").read_bytes()

    assert cli_main([
        "thin", "--points", str(tmp_path / "pts.csv"), "--edges", str(tmp_path / "edges.csv"),
        "--q", "0.5", "--seed", "3", "-o", str(tmp_path / "thin.csv"),
    ]) == 0
    n_full = len((tmp_path / "edges.csv").read_text().splitlines()) - 2
    n_thin = len((tmp_path / "thin.csv").read_text().splitlines()) - 2
    assert 0 < n_thin < n_full


def test_gen_deterministic_bytes(tmp_path):
    for name in ("a.csv", "b.csv"):
        cli_main([
            "gen", "--lambda", "0.8", "--dim", "3", "--side", "6", "--seed", "21",
            "--boundary", "torus", "-o", str(tmp_path / name),
        ])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cli_error_exit_codes(tmp_path):
    res = _run_cli(["gen", "--bogus-flag", "1"], tmp_path)
    assert res.returncode == 1
    assert "usage" in res.stderr.lower()

    res = _run_cli(["frobnicate"], tmp_path)
    assert res.returncode == 1

    bad = tmp_path / "bad.toml"
    bad.write_text('experiment = "chain"\nseed = 1\n')  # missing everything else
    res = _run_cli(["chain", "--config", str(bad), "-o", str(tmp_path / "out")], tmp_path)
    assert res.returncode == 1
    assert "invalid configuration" in res.stderr

    # percolation on a hopeless grid: diagnostic failure -> exit 2
    res = _run_cli(
        [
            "percolate", "--rstar", "1", "--dim", "2", "--sizes", "8,16",
            "--grid", "0.06,0.1,0.16,0.22", "--replicates", "12", "--seed", "4",
            "-o", str(tmp_path / "perc"),
        ],
        tmp_path,
    )
    assert res.returncode == 2
    assert "diagnostic" in res.stderr


def test_report_check_failure_exits_3(tmp_path):
    cfg = tmp_path / "report.toml"
    # tiny replicate count with a seed whose fluctuations exceed the 3 SE bands
    cfg.write_text(
        'experiment = "sparsity-report"\ndim = 2\nside = 12.0\nlambda = 1.0\n'
        "rstar = 1.0\nalpha = 1.0\ntheta = 1.0\nreplicates = 5\nseed = 3\n"
    )
    res = _run_cli(["report", "--config", str(cfg), "-o", str(tmp_path / "rep"), "--check"], tmp_path)
    assert res.returncode == 3
    assert "failed" in res.stderr


def test_report_check_passes(tmp_path):
    cfg = tmp_path / "report.toml"
    cfg.write_text(
        'experiment = "sparsity-report"\ndim = 2\nside = 16.0\nlambda = 1.0\n'
        "rstar = 1.0\nalpha = 1.0\ntheta = 1.0\nreplicates = 50\nseed = 42\n"
    )
    assert cli_main(["report", "--config", str(cfg), "-o", str(tmp_path / "rep"), "--check"]) == 0


def test_config_validation():
    with pytest.raises(ConfigError):
        make_config({"seed": 1})
    with pytest.raises(ConfigError):
        make_config({"experiment": "warp-drive", "seed": 1})
    with pytest.raises(ConfigError):
        make_config({"experiment": "chain", "seed": 1, "replicates": 0})
    with pytest.raises(ConfigError):
        make_config({"experiment": "chain", "seed": 1, "beta_grid": [0.2, 0.1]})
    cfg = make_config({"experiment": "chain", "seed": 1})
    with pytest.raises(ConfigError):
        cfg["missing-key"]


def test_load_config_toml(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text(
        'experiment = "phase-diagram"\nseed = 5\nlambda_grid = [1.0, 2.0]\n'
        "beta_grid = [0.1, 0.2]\nreplicates = 2\n"
    )
    cfg = load_config(path)
    assert cfg.kind == "phase-diagram"
    assert cfg.seed == 5
    assert cfg["lambda_grid"] == [1.0, 2.0]
    assert cfg.hash() == make_config(dict(cfg.raw)).hash()


def test_window_weight_integral_matches_full_space():
    # a window much wider than 1/alpha captures the closed-form full integral;
    # accuracy is kink-limited (|x| at the origin), far below any 3 SE band
    win = BoxWindow(dim=2, side=40.0)
    assert window_weight_integral(1.0, win) == pytest.approx(2 * math.pi, rel=1e-4)


@pytest.fixture(scope="module")
def chain_outputs(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("chain")
    raw = {
        "experiment": "chain",
        "dim": 2,
        "side": 14.0,
        "lambda": 2.0,
        "rstar": 1.0,
        "margin": 1.0,
        "phi_star": 1.0,
        "measure": "ising",
        "beta": 0.4,
        "boundary_spin": 1.0,
        "sweeps": 400,
        "burn_in": 100,
        "thin": 2,
        "seed": 13,
        "subset": "core",
    }
    summary = run_chain_experiment(make_config(raw), outdir)
    return outdir, summary


def test_chain_experiment_layout(chain_outputs):
    outdir, summary = chain_outputs
    assert (outdir / "points" / "points.csv").exists()
    assert (outdir / "graphs" / "edges.csv").exists()
    assert (outdir / "sweeps" / "chain.csv").exists()
    assert (outdir / "manifest.json").exists()
    assert set(summary) >= {"beta", "lambda", "s", "m_mean", "m_se", "tau_int", "seeds"}
    lines = (outdir / "sweeps" / "chain.csv").read_text().splitlines()
    assert lines[0] == "sweep,magnetization,energy"
    assert len(lines) == 1 + 150  # (400 - 100) / 2 records


def test_manifest_hashes_match_files(chain_outputs):
    outdir, _ = chain_outputs
    manifest = json.loads((outdir / "manifest.json").read_text())
    import hashlib

    for entry in manifest["outputs"]:
        data = (outdir / entry["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]
        assert len(data) == entry["bytes"]


def _sparsity_raw(threads=1):
    return {
        "experiment": "sparsity-report",
        "dim": 2,
        "side": 12.0,
        "lambda": 1.0,
        "rstar": 1.0,
        "alpha": 1.0,
        "theta": 1.0,
        "replicates": 6,
        "seed": 99,
        "threads": threads,
    }


def test_manifest_reproducibility_and_thread_independence(tmp_path):
    paths = []
    for name, threads in (("one", 1), ("two", 1), ("par", 2)):
        outdir = tmp_path / name
        run_sparsity_report(make_config(_sparsity_raw(threads)), outdir)
        paths.append(outdir)
    ref_csv = (paths[0] / "sweeps" / "sparsity.csv").read_bytes()
    ref_json = (paths[0] / "sparsity_aggregate.json").read_bytes()
    for other in paths[1:]:
        assert (other / "sweeps" / "sparsity.csv").read_bytes() == ref_csv
        assert (other / "sparsity_aggregate.json").read_bytes() == ref_json
    # manifests agree except for the wall clock (and the thread count in config)
    a = json.loads((paths[0] / "manifest.json").read_text())
    b = json.loads((paths[1] / "manifest.json").read_text())
    a.pop("wall_clock_s"), b.pop("wall_clock_s")
    assert a == b


@pytest.fixture(scope="module")
def small_phase(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("phase")
    raw = {
        "experiment": "phase-diagram",
        "dim": 2,
        "side": 16.0,
        "rstar": 1.0,
        "margin": 1.0,
        "phi_star": 1.0,
        "measure": "ising",
        "lambda_grid": [8.0 / math.pi],
        "beta_grid": [0.05, 0.12, 0.2, 0.35, 0.5, 0.7],
        "replicates": 3,
        "sweeps": 900,
        "burn_in": 250,
        "thin": 1,
        "seed": 2024,
        "subset": "core",
        "lambda_star_hat": 1.4401028426606057,
    }
    result = run_phase_diagram(make_config(raw), outdir)
    return outdir, result


def test_phase_diagram_outputs_and_equivariance(small_phase):
    outdir, result = small_phase
    assert (outdir / "sweeps" / "phase_diagram.csv").exists()
    assert (outdir / "phase_diagram.json").exists()
    for row in result.replicate_rows:
        assert row["m_plus"] == -row["m_minus"]  # mirror coupling is exact


def test_phase_diagram_monotone_in_beta(small_phase):
    _, result = small_phase
    cells = sorted(result.cells, key=lambda c: c["beta"])
    violations = 0
    for a, b in zip(cells, cells[1:]):
        joint = 3 * math.sqrt(a["m_plus_se"] ** 2 + b["m_plus_se"] ** 2)
        if b["m_plus_mean"] < a["m_plus_mean"] - joint:
            violations += 1
    assert violations <= 1  # spec allows one violation per twenty cells


def test_phase_diagram_onset_within_sufficient_bound(small_phase):
    _, result = small_phase
    lam_key = next(iter(result.onset_beta))
    onset = result.onset_beta[lam_key]
    bound = result.beta_star[lam_key]
    betas = [0.05, 0.12, 0.2, 0.35, 0.5, 0.7]
    assert bound is not None
    assert onset is not None
    grid_step = max(b2 - b1 for b1, b2 in zip(betas, betas[1:]))
    assert onset <= bound + grid_step


def test_phase_diagram_subcritical_grid_rejected(tmp_path):
    raw = {
        "experiment": "phase-diagram",
        "dim": 2,
        "side": 16.0,
        "rstar": 1.0,
        "measure": "ising",
        "lambda_grid": [0.3 / math.pi],
        "beta_grid": [0.5],
        "replicates": 2,
        "sweeps": 100,
        "burn_in": 10,
        "seed": 1,
    }
    from amorferro.percolation import NoCrossingError

    with pytest.raises(NoCrossingError):
        run_phase_diagram(make_config(raw), tmp_path)


def test_wells_cli(tmp_path):
    assert cli_main(["wells", "--seed", "4", "-o", str(tmp_path / "wells")]) == 0
    summary = json.loads((tmp_path / "wells" / "wells_summary.json").read_text())
    assert set(summary) == {"ising", "uniform", "density"}
    for row in summary.values():
        assert row["all_nonnegative"]
        assert row["finite_volume_failures"] == 0
    assert (tmp_path / "wells" / "certificate_uniform.json").exists()


def test_percolate_cli_smoke(tmp_path):
    code = cli_main([
        "percolate", "--rstar", "1", "--dim", "2", "--sizes", "8,16",
        "--grid", "1.05,1.2,1.35,1.5,1.65,1.8", "--replicates", "40",
        "--seed", "11", "--bootstrap", "60", "--plots",
        "-o", str(tmp_path / "perc"),
    ])
    assert code == 0
    payload = json.loads((tmp_path / "perc" / "threshold.json").read_text())
    assert payload["parameter"] == "lambda"
    assert payload["ci_low"] <= payload["estimate"] <= payload["ci_high"]
    assert (tmp_path / "perc" / "sweeps" / "threshold.svg").exists()
    assert (tmp_path / "perc" / "sweeps" / "threshold.csv").exists()
