"""Quenched ferromagnets on random geometric graphs.

Sampling of Poisson configurations and their fixed-radius graphs, percolation
and threshold estimation, finite-volume Gibbs chains under clamped boundary
spins, and the one-site comparison certificates — each backed by independent
brute-force oracles.
"""

__version__ = "0.1.0"

from .kernels import BACKEND as kernel_backend  # noqa: F401
