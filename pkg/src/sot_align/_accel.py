"""Numba toggle for the hot kernels.

Set ``SOT_ALIGN_DISABLE_NUMBA=1`` to run every kernel through its pure
numpy / interpreted path instead.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

NUMBA_DISABLED = os.environ.get("SOT_ALIGN_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")
USE_NUMBA = numba is not None and not NUMBA_DISABLED


def jit(fn):
    """``numba.njit(cache=True)`` when acceleration is on, identity otherwise."""
    if not USE_NUMBA:
        return fn
    return numba.njit(cache=True)(fn)


def interpreted(fn):
    """The undecorated Python function behind a jitted kernel."""
    return getattr(fn, "py_func", fn)
