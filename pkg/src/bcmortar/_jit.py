"""Numba switch. Set ``BCMORTAR_NUMBA=0`` to run the pure-numpy kernels."""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("BCMORTAR_NUMBA", "1").lower() not in (
    "0", "false", "no", "off")


def njit(fn):
    """Compile with numba when available; the wrapped function stays callable as ``fn.py_func``."""
    if numba is None:
        fn.py_func = fn
        return fn
    return numba.njit(cache=True)(fn)
