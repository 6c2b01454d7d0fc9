"""Kernel backend selection.

The compiled extension is used when it imported cleanly; otherwise (or when
``EUNIT_SUE_PURE_PYTHON=1`` is set) the numpy fallback takes over.  Both
backends consume identical random streams, so results do not depend on the
choice; only throughput does.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_FORCE_PYTHON = os.environ.get("EUNIT_SUE_PURE_PYTHON", "").lower() in {"1", "true", "yes"}

if _compiled is not None and not _FORCE_PYTHON:
    KERNEL_BACKEND = "cython"
    count_chunk = _compiled.count_chunk
else:
    KERNEL_BACKEND = "python"
    count_chunk = _kernels_py.count_chunk


def available_backends() -> tuple[str, ...]:
    return ("cython", "python") if _compiled is not None else ("python",)


def get_count_chunk(backend: str | None = None):
    """Kernel lookup for benchmarks and equivalence tests."""
    if backend is None:
        return count_chunk
    if backend == "python":
        return _kernels_py.count_chunk
    if backend == "cython":
        if _compiled is None:
            raise ValueError("compiled kernel not available")
        return _compiled.count_chunk
    raise ValueError(f"unknown backend {backend!r}")
