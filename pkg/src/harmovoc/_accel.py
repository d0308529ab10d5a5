"""Numba detection and the switch between compiled and pure-numpy kernels.

Set ``HARMOVOC_DISABLE_NUMBA=1`` before import to force the numpy path.
"""
import os

_DISABLED = os.environ.get("HARMOVOC_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False
    _njit = None


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    kwargs.setdefault("cache", True)
    if HAVE_NUMBA:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]):
        return args[0]
    return lambda f: f


def use_numba() -> bool:
    return HAVE_NUMBA
