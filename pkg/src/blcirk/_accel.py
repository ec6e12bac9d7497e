"""Numba switch shared by the numeric kernels.

Set ``BLCIRK_NUMBA=0`` in the environment (before import) to run every
kernel through its pure numpy/Python fallback.  The switch is read once at
import time; :func:`kernel` returns the jitted function when numba is
active, otherwise the fallback supplied by the caller.
"""

import os

__all__ = ["NUMBA_ENABLED", "njit", "kernel"]


def _flag():
    value = os.environ.get("BLCIRK_NUMBA", "1").strip().lower()
    return value not in ("0", "false", "no", "off")


try:
    if not _flag():
        raise ImportError("numba disabled by BLCIRK_NUMBA")
    import numba as _numba
except ImportError:
    _numba = None

NUMBA_ENABLED = _numba is not None


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)`` or the identity when numba is off."""
    if func is None:
        return lambda f: njit(f, **kwargs)
    if not NUMBA_ENABLED:
        return func
    kwargs.setdefault("cache", True)
    return _numba.njit(**kwargs)(func)


def kernel(jitted, fallback):
    """Pick ``jitted`` when numba is on, else ``fallback``."""
    return jitted if NUMBA_ENABLED else fallback
