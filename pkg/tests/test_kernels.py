"""Backend equivalence: the compiled kernels must match the pure ones bit for
bit, and the sweep kernels must reproduce the single-site step functions."""

import numpy as np
import pytest

from amorferro.kernels import available_backends
from amorferro.pointprocess import BoxWindow, sample_poisson
from amorferro.geomgraph import build_graph
from amorferro.spinsystem import (
    ChainConfig,
    InteractionProfile,
    SingleSpinMeasure,
    SpinState,
    heat_bath_step_ising,
    metropolis_step_continuous,
    run_chain,
)
from amorferro.rng import stream

from conftest import graph_from_positions

BACKENDS = available_backends()
CONST = InteractionProfile(phi_star=1.0, r_star=1.0)

needs_both = pytest.mark.skipif(
    "compiled" not in BACKENDS, reason="compiled extension not built"
)


def _canonical(ei, ej):
    lo, hi = np.minimum(ei, ej), np.maximum(ei, ej)
    order = np.lexsort((hi, lo))
    return lo[order], hi[order]


@needs_both
@pytest.mark.parametrize("dim,torus", [(2, False), (2, True), (3, False), (3, True)])
def test_cell_edges_backends_identical(dim, torus):
    gen = np.random.default_rng(101)
    side = 14.0
    for _ in range(6):
        n = int(gen.integers(0, 900))
        pos = gen.uniform(-side / 2, side / 2, size=(n, dim))
        got = {}
        for name, mod in BACKENDS.items():
            got[name] = _canonical(*mod.cell_edges(pos, 1.1, side, torus))
        assert np.array_equal(got["pure"][0], got["compiled"][0])
        assert np.array_equal(got["pure"][1], got["compiled"][1])


@needs_both
def test_union_components_backends_identical():
    gen = np.random.default_rng(7)
    for _ in range(10):
        n = int(gen.integers(1, 500))
        m = int(gen.integers(0, 3 * n))
        ei = gen.integers(0, n, size=m)
        ej = gen.integers(0, n, size=m)
        keep = ei != ej
        args = (n, ei[keep].astype(np.int64), ej[keep].astype(np.int64))
        lab_p = BACKENDS["pure"].union_components(*args)
        lab_c = BACKENDS["compiled"].union_components(*args)
        assert np.array_equal(lab_p, lab_c)
        # canonical labels: every label is the min vertex of its class
        for lab in np.unique(lab_p):
            members = np.nonzero(lab_p == lab)[0]
            assert members.min() == lab


def _chain_system(n_interior=40, seed=3):
    window = BoxWindow(dim=2, side=9.0)
    graph = build_graph(sample_poisson(1.5, window, seed), 1.0)
    interior = np.arange(min(n_interior, graph.n), dtype=np.int64)
    from amorferro.spinsystem import _ChainSystem

    system = _ChainSystem.build(graph, interior, CONST)
    return graph, interior, system


@needs_both
def test_heat_bath_chunk_backends_identical():
    _, interior, system = _chain_system()
    gen = stream(5, "test-hb")
    u = gen.random((50, interior.size))
    sig0 = np.where(gen.random(interior.size) < 0.5, 1.0, -1.0)
    results = {}
    for name, mod in BACKENDS.items():
        sig = sig0.copy()
        mod.heat_bath_chunk(
            sig, system.indptr, system.indices, system.weights,
            system.ext_strength, 1.0, 0.7, u,
        )
        results[name] = sig
    assert np.array_equal(results["pure"], results["compiled"])


@needs_both
@pytest.mark.parametrize("kind,p0,p1", [(1, 1.0, 0.0), (2, 1.0, -2.0)])
def test_metropolis_chunk_backends_identical(kind, p0, p1):
    _, interior, system = _chain_system()
    gen = stream(6, "test-mp")
    u = gen.random((50, interior.size, 2))
    sig0 = gen.uniform(-0.9, 0.9, interior.size)
    results = {}
    for name, mod in BACKENDS.items():
        sig = sig0.copy()
        acc = mod.metropolis_chunk(
            sig, system.indptr, system.indices, system.weights,
            system.ext_strength, 1.0, 0.7, 0.6, kind, p0, p1, u,
        )
        results[name] = (sig, acc)
    assert np.array_equal(results["pure"][0], results["compiled"][0])
    assert results["pure"][1] == results["compiled"][1]


def test_heat_bath_chunk_matches_step_function():
    # one sweep of the kernel == sequential single-site heat-bath updates
    graph = graph_from_positions(
        [[0.0, 0.0], [0.8, 0.0], [0.8, 0.8], [0.0, 0.8], [2.5, 2.5], [-1.0, 0.2]],
        side=10.0,
        r_star=1.0,
    )
    interior = np.arange(4, dtype=np.int64)
    from amorferro.spinsystem import _ChainSystem

    system = _ChainSystem.build(graph, interior, CONST)
    gen = stream(9, "hb-vs-step")
    u = gen.random((3, 4))
    sig_kernel = np.array([1.0, -1.0, 1.0, -1.0])
    state = SpinState(
        graph=graph, interior=interior, sigma=sig_kernel.copy(), boundary_value=0.5
    )
    from amorferro import kernels

    kernels.heat_bath_chunk(
        sig_kernel, system.indptr, system.indices, system.weights,
        system.ext_strength, 0.5, 0.9, u,
    )
    for t in range(3):
        for pos, v in enumerate(interior):
            heat_bath_step_ising(state, int(v), 0.9, float(u[t, pos]), CONST)
    assert np.array_equal(state.sigma, sig_kernel)


@pytest.mark.parametrize(
    "measure,width",
    [(SingleSpinMeasure("uniform", b=1.0), 0.7), (SingleSpinMeasure("density", v4=1.0, v2=-2.0), 0.9)],
)
def test_metropolis_chunk_matches_step_function(measure, width):
    graph = graph_from_positions(
        [[0.0, 0.0], [0.8, 0.0], [0.8, 0.8], [0.0, 0.8], [-1.0, 0.2]],
        side=10.0,
        r_star=1.0,
    )
    interior = np.arange(4, dtype=np.int64)
    from amorferro.spinsystem import _ChainSystem

    system = _ChainSystem.build(graph, interior, CONST)
    gen = stream(11, "mp-vs-step")
    u = gen.random((3, 4, 2))
    sig_kernel = np.array([0.2, -0.4, 0.6, -0.8])
    state = SpinState(
        graph=graph, interior=interior, sigma=sig_kernel.copy(), boundary_value=0.5
    )
    from amorferro import kernels

    kind = 1 if measure.variant == "uniform" else 2
    p0 = measure.b if kind == 1 else measure.v4
    p1 = 0.0 if kind == 1 else measure.v2
    kernels.metropolis_chunk(
        sig_kernel, system.indptr, system.indices, system.weights,
        system.ext_strength, 0.5, 0.9, width, kind, p0, p1, u,
    )
    for t in range(3):
        for pos, v in enumerate(interior):
            metropolis_step_continuous(
                state, int(v), 0.9, width, float(u[t, pos, 0]), float(u[t, pos, 1]),
                measure, CONST,
            )
    assert np.array_equal(state.sigma, sig_kernel)


@needs_both
def test_full_chain_identical_across_backends(monkeypatch):
    # the selected backend must not change trajectories, only speed
    window = BoxWindow(dim=2, side=10.0)
    graph = build_graph(sample_poisson(1.2, window, 13), 1.0)
    interior = np.arange(graph.n, dtype=np.int64)
    cfg = ChainConfig(beta=0.8, sweeps=120, burn_in=20, seed=77)

    results = {}
    import amorferro.kernels as kmod
    import amorferro.spinsystem as smod

    for name, mod in BACKENDS.items():
        monkeypatch.setattr(kmod, "heat_bath_chunk", mod.heat_bath_chunk)
        monkeypatch.setattr(smod.kernels, "heat_bath_chunk", mod.heat_bath_chunk)
        res = run_chain(graph, interior, SingleSpinMeasure("ising"), CONST, 0.8, 1.0, cfg)
        results[name] = res
    assert np.array_equal(results["pure"].magnetization, results["compiled"].magnetization)
    assert np.array_equal(results["pure"].energy, results["compiled"].energy)
