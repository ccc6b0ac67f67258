"""Switch between numba-compiled kernels and the plain numpy path.

Set ``CPC_DISABLE_NUMBA=1`` to run every kernel as ordinary Python/numpy.
"""
import os

_FLAG = os.environ.get("CPC_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and not DISABLED


def njit(func):
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func
