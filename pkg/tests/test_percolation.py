import math

import numpy as np
import pytest

from amorferro.geomgraph import build_graph
from amorferro.percolation import (
    NoCrossingError,
    bernoulli_thin,
    beta_star_bound,
    compute_q_star_bound,
    connected_components,
    estimate_lambda_star,
    estimate_q_star_empirical,
    spans,
    wraps,
    write_threshold_csv,
    write_threshold_json,
)
from amorferro.pointprocess import BoxWindow, sample_poisson

from conftest import bfs_components, graph_from_positions


def test_components_trivials():
    pts = [[-3.0, 0.0], [-1.5, 0.0], [0.0, 0.0], [1.5, 0.0], [3.0, 0.0]]
    g = graph_from_positions(pts, side=10.0, r_star=1.0)
    lab = connected_components(g)
    assert lab.n_components == 5
    assert lab.largest_fraction == pytest.approx(0.2)

    chain = [[0.0, 0.0], [0.9, 0.0], [1.8, 0.0], [2.7, 0.0]]
    g2 = graph_from_positions(chain, side=10.0, r_star=1.0)
    lab2 = connected_components(g2)
    assert lab2.n_components == 1
    assert lab2.largest_fraction == 1.0
    assert lab2.largest_label() == 0


def test_components_match_bfs_oracle():
    window = BoxWindow(dim=2, side=16.0)
    for seed in range(20):
        g = build_graph(sample_poisson(1.2, window, seed), 1.0)
        lab = connected_components(g)
        oracle = bfs_components(g.n, g.edge_i, g.edge_j)
        assert np.array_equal(lab.labels, oracle)
        assert sum(lab.sizes.values()) == g.n


def test_spans_constructed_chain():
    # chain of vertices spaced 0.9 across the full box spans axis 0
    xs = np.arange(-4.95, 5.0, 0.9)
    pts = np.column_stack([xs, np.zeros_like(xs)])
    g = graph_from_positions(pts, side=10.0, r_star=1.0)
    lab = connected_components(g)
    assert spans(g, lab, axis=0)
    assert not spans(g, lab, axis=1)

    empty = graph_from_positions(np.zeros((0, 2)), side=10.0, r_star=1.0)
    assert not spans(empty, connected_components(empty), axis=0)


def test_spans_requires_free_mode_and_wraps_detects_seam():
    pts = [[-7.8, 0.0], [7.8, 0.0]]
    torus = graph_from_positions(pts, side=16.0, r_star=1.0, mode="torus")
    lab = connected_components(torus)
    with pytest.raises(ValueError):
        spans(torus, lab, axis=0)
    assert wraps(torus, lab, axis=0)
    assert not wraps(torus, lab, axis=1)
    free = graph_from_positions(pts, side=16.0, r_star=1.0, mode="free")
    with pytest.raises(ValueError):
        wraps(free, connected_components(free), axis=0)


@pytest.fixture(scope="module")
def medium_graph():
    window = BoxWindow(dim=2, side=32.0, boundary_mode="free")
    return build_graph(sample_poisson(2.0, window, 77), 1.0)


def test_thin_endpoints(medium_graph):
    g = medium_graph
    full = bernoulli_thin(g, 1.0, seed=5)
    assert np.array_equal(full.edge_i, g.edge_i) and np.array_equal(full.edge_j, g.edge_j)
    none = bernoulli_thin(g, 0.0, seed=5)
    assert none.n_edges == 0 and none.n == g.n
    with pytest.raises(ValueError):
        bernoulli_thin(g, 1.5, seed=5)


def test_thin_kept_fraction(medium_graph):
    g = medium_graph
    assert g.n_edges > 5000
    kept = bernoulli_thin(g, 0.5, seed=9).n_edges / g.n_edges
    assert abs(kept - 0.5) <= 3.0 * math.sqrt(0.25 / g.n_edges)


def test_thin_monotone_coupling_exact(medium_graph):
    g = medium_graph
    qs = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    prev = None
    for q in qs:
        edges = set(
            zip(bernoulli_thin(g, q, seed=31).edge_i.tolist(),
                bernoulli_thin(g, q, seed=31).edge_j.tolist())
        )
        if prev is not None:
            assert prev <= edges  # nested kept-edge sets under one seed
        prev = edges


def test_spanning_monotone_in_q_per_realization():
    window = BoxWindow(dim=2, side=16.0, boundary_mode="free")
    for seed in range(8):
        g = build_graph(sample_poisson(2.2, window, seed), 1.0)
        flags = []
        for q in (0.3, 0.5, 0.7, 0.9, 1.0):
            t = bernoulli_thin(g, q, seed=100 + seed)
            flags.append(spans(t, connected_components(t), axis=0))
        # once spanning appears it persists: the kept sets are nested
        assert flags == sorted(flags)


def test_q_star_bound_and_beta_star():
    assert compute_q_star_bound(2.0, 2.0) == 1.0
    assert compute_q_star_bound(4.0, 2.0) == 0.5
    assert compute_q_star_bound(4.0, 2.0) * 4.0 == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(ValueError):
        compute_q_star_bound(1.0, 2.0)

    assert beta_star_bound(0.5, 1.0, 1.0) == pytest.approx(math.log(3.0) / 2.0, rel=1e-14)
    assert beta_star_bound(1e-9, 1.0, 1.0) == pytest.approx(1e-9, rel=1e-6)
    assert beta_star_bound(0.5, 1.0, 2.0) == 4.0 * beta_star_bound(0.5, 1.0, 1.0)
    assert beta_star_bound(0.5, 2.0, 1.0) == pytest.approx(math.log(3.0) / 4.0, rel=1e-14)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            beta_star_bound(bad, 1.0, 1.0)


def test_largest_fraction_monotone_in_intensity():
    window = BoxWindow(dim=2, side=16.0, boundary_mode="free")
    lams = [0.6, 1.0, 1.43, 1.9]
    reps = 60
    means, ses = [], []
    for li, lam in enumerate(lams):
        vals = []
        for rep in range(reps):
            g = build_graph(sample_poisson(lam, window, 1000 * li + rep), 1.0)
            vals.append(connected_components(g).largest_fraction)
        vals = np.asarray(vals)
        means.append(vals.mean())
        ses.append(vals.std(ddof=1) / math.sqrt(reps))
    for i in range(len(lams) - 1):
        joint = math.sqrt(ses[i] ** 2 + ses[i + 1] ** 2)
        assert means[i + 1] >= means[i] - 3 * joint


def test_deep_subcritical_spanning_probability():
    window = BoxWindow(dim=2, side=32.0, boundary_mode="free")
    lam = 1.0 / math.pi  # unit mean degree
    hits = 0
    reps = 100
    for seed in range(reps):
        g = build_graph(sample_poisson(lam, window, seed), 1.0)
        if spans(g, connected_components(g), axis=0):
            hits += 1
    assert hits / reps < 0.05


def test_no_crossing_on_subcritical_grid():
    grid = [0.2 / math.pi, 0.5 / math.pi, 0.8 / math.pi, 1.0 / math.pi]
    with pytest.raises(NoCrossingError) as err:
        estimate_lambda_star(1.0, 2, [8.0, 16.0], grid, replicates=20, seed=3)
    assert err.value.curves is not None


def test_lambda_star_smoke_and_writers(tmp_path):
    grid = list(np.linspace(3.2, 6.0, 7) / math.pi)
    est = estimate_lambda_star(1.0, 2, [8.0, 16.0], grid, replicates=50, seed=5, bootstrap=60)
    assert 3.2 <= est.estimate * math.pi <= 6.0
    assert est.ci_low <= est.estimate <= est.ci_high
    for curve in est.curves:
        mono = curve["probs_monotone"]
        assert all(b >= a for a, b in zip(mono, mono[1:]))
    write_threshold_csv(tmp_path / "curves.csv", est)
    write_threshold_json(tmp_path / "est.json", est)
    lines = (tmp_path / "curves.csv").read_text().splitlines()
    assert lines[0] == "L,param,spanning_prob,replicates,se"
    assert len(lines) == 1 + 2 * len(grid)
    import json

    payload = json.loads((tmp_path / "est.json").read_text())
    assert set(payload) >= {"parameter", "estimate", "ci_low", "ci_high", "seeds", "grid"}


def test_q_star_requires_supercritical_intensity():
    grid = [0.2, 0.4, 0.6, 0.8]
    with pytest.raises(NoCrossingError):
        estimate_q_star_empirical(
            0.5 / math.pi, 1.0, 2, [8.0, 16.0], grid, replicates=20, seed=4
        )


@pytest.mark.slow
def test_q_star_decreases_with_intensity():
    grid = list(np.linspace(0.2, 0.95, 7))
    e6 = estimate_q_star_empirical(
        6.0 / math.pi, 1.0, 2, [12.0, 24.0], grid, replicates=60, seed=7, bootstrap=80
    )
    e12 = estimate_q_star_empirical(
        12.0 / math.pi, 1.0, 2, [12.0, 24.0], grid, replicates=60, seed=8, bootstrap=80
    )
    assert e12.estimate < e6.estimate
    assert e12.ci_high < e6.ci_low  # disjoint confidence intervals


def test_subcritical_thinned_regime():
    # retention below 1/(mean degree): spanning collapses
    window = BoxWindow(dim=2, side=24.0, boundary_mode="free")
    lam = 8.0 / math.pi
    hits = 0
    reps = 60
    for seed in range(reps):
        g = build_graph(sample_poisson(lam, window, seed), 1.0)
        t = bernoulli_thin(g, 0.08, seed=500 + seed)
        if spans(t, connected_components(t), axis=0):
            hits += 1
    assert hits / reps < 0.05
