"""Backend selection for the numeric kernels.

Set ``PPMINSPECT_BACKEND=numpy`` to force the pure-numpy code paths even when
numba is importable. The numba kernels are still compiled on demand so the
benchmark can compare both.
"""
from __future__ import annotations

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

BACKEND = os.environ.get("PPMINSPECT_BACKEND", "numba").strip().lower()
if BACKEND not in ("numba", "numpy"):
    raise ImportError(f"PPMINSPECT_BACKEND must be 'numba' or 'numpy', got {BACKEND!r}")

USE_NUMBA = HAVE_NUMBA and BACKEND == "numba"


def njit(func):
    """``numba.njit(cache=True)`` when numba exists, identity otherwise."""
    if HAVE_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def active_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
