"""Splittable, counter-based random streams.

Every stochastic task derives its own Philox generator from a master seed
plus a tuple of tags (purpose string, replicate index, grid indices, ...).
The derivation is a SHA-256 hash of the canonical tag tuple, so streams are
independent of execution order and safe to draw in parallel.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_key", "substream_seed", "stream"]


def derive_key(master_seed: int, *tags) -> np.ndarray:
    """128-bit Philox key for (master_seed, *tags).

    Tags may be ints, floats, strings or nested tuples of those; their repr
    is canonical across runs.
    """
    payload = repr((int(master_seed),) + tags).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def substream_seed(master_seed: int, *tags) -> int:
    """Derive a 63-bit child seed, for APIs that take a plain integer seed."""
    payload = repr((int(master_seed),) + tags).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def stream(master_seed: int, *tags) -> np.random.Generator:
    """A fresh Generator on the keyed Philox stream for (master_seed, *tags)."""
    return np.random.Generator(np.random.Philox(key=derive_key(master_seed, *tags)))
