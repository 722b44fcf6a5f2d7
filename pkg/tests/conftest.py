"""Shared fixtures: hand-laid graphs and independent oracles."""

from __future__ import annotations

from collections import deque

import numpy as np
import pytest

from amorferro.geomgraph import build_graph
from amorferro.pointprocess import BoxWindow, PointConfiguration


def bfs_components(n: int, ei, ej) -> np.ndarray:
    """Breadth-first component labels (canonical: min vertex id), independent
    of the union-find implementation under test."""
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in zip(ei, ej):
        adj[int(a)].append(int(b))
        adj[int(b)].append(int(a))
    labels = np.full(n, -1, dtype=np.int64)
    for start in range(n):
        if labels[start] >= 0:
            continue
        queue = deque([start])
        labels[start] = start
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if labels[w] < 0:
                    labels[w] = start
                    queue.append(w)
    return labels


def graph_from_positions(positions, side, r_star, mode="free"):
    positions = np.asarray(positions, dtype=np.float64)
    window = BoxWindow(dim=positions.shape[1], side=side, boundary_mode=mode)
    pc = PointConfiguration(window=window, points=positions, intensity=1.0, seed=0)
    return build_graph(pc, r_star)


def ladder_positions(columns: int, spacing: float = 0.9):
    """2 x columns ladder; grid neighbors sit within unit distance."""
    pts = []
    for c in range(columns):
        pts.append([c * spacing, 0.0])
        pts.append([c * spacing, spacing])
    return np.asarray(pts)


@pytest.fixture
def ten_site_instance():
    """Fixed 10-interior-vertex two-state instance with boundary vertices on
    both ends of a 2x5 ladder."""
    interior = ladder_positions(5)
    boundary = np.array([[-0.9, 0.0], [-0.9, 0.9], [4.5, 0.0], [4.5, 0.9]])
    positions = np.vstack([interior, boundary]) - np.array([1.8, 0.45])
    graph = graph_from_positions(positions, side=14.0, r_star=1.0)
    return graph, np.arange(10, dtype=np.int64)


@pytest.fixture
def twelve_site_instance():
    interior = ladder_positions(6)
    boundary = np.array([[-0.9, 0.0], [5.4, 0.9]])
    positions = np.vstack([interior, boundary]) - np.array([2.25, 0.45])
    graph = graph_from_positions(positions, side=14.0, r_star=1.0)
    return graph, np.arange(12, dtype=np.int64)
