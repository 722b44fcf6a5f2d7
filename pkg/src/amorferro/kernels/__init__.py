"""Kernel backend selection: compiled extension if built, else pure Python.

Set AMORFERRO_PURE=1 to force the pure backend (used by the benchmark and
the cross-backend identity tests). Both backends produce bit-identical
results; only speed differs.
"""

from __future__ import annotations

import os

from . import _pykernels

_impl = _pykernels
if not os.environ.get("AMORFERRO_PURE"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        pass

BACKEND: str = _impl.BACKEND
cell_edges = _impl.cell_edges
union_components = _impl.union_components
heat_bath_chunk = _impl.heat_bath_chunk
metropolis_chunk = _impl.metropolis_chunk


def available_backends() -> dict:
    """Importable backend modules by name, for benchmarks and tests."""
    backends = {"pure": _pykernels}
    try:
        from . import _ckernels

        backends["compiled"] = _ckernels
    except ImportError:
        pass
    return backends
