"""Optional numba acceleration.

Hot loops are written once in a numba-compatible subset of Python.  When
numba is importable and ``BERGMAN_KIT_NUMBA`` is not set to ``0``, they are
compiled with ``njit``; otherwise the plain-Python versions are replaced by
vectorized numpy fallbacks (see ``_kernels``).
"""
import os

try:
    from numba import njit as _njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("BERGMAN_KIT_NUMBA", "1") != "0"


def maybe_njit(func):
    """``numba.njit(cache=True)`` when acceleration is enabled, else identity."""
    if USE_NUMBA:
        return _njit(cache=True)(func)
    return func
