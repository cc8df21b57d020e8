"""Optional numba acceleration for the hot inner loops.

Every jitted kernel in this package is written in plain, njit-compatible
Python, so the exact same function body runs on both paths.  Set the
environment variable ``SIPLAB_NO_NUMBA=1`` to force the pure-Python/numpy
fallback (useful for debugging and for the backend benchmark).  Because the
two paths execute identical code on identical random streams, they produce
bit-identical trajectories.
"""

import os

try:
    from numba import njit as _njit

    _have_numba = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _have_numba = False


def numba_disabled() -> bool:
    return os.environ.get("SIPLAB_NO_NUMBA", "0") not in ("", "0")


USE_NUMBA = _have_numba and not numba_disabled()


def maybe_njit(*args, **kwargs):
    """``numba.njit`` when acceleration is enabled, identity otherwise."""

    def decorate(func):
        if USE_NUMBA:
            return _njit(*args, **kwargs)(func)
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        func, args = args[0], ()
        return decorate(func)
    return decorate
