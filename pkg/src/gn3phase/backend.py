"""Kernel backend selection: numba-compiled or pure numpy.

The hot spots of a run are the tridiagonal solves and the scalar Newton
loops evaluating graph resolvents; both live in :mod:`gn3phase.kernels` and
are compiled with numba when it is importable.  Setting ``GN3_NUMBA=0`` in
the environment forces the pure-numpy fallback (same source, undecorated).
``benchmarks/bench_backends.py`` times the two paths against each other.
"""

from __future__ import annotations

import os

__all__ = ["NUMBA_ENABLED", "njit"]


def _numba_requested() -> bool:
    flag = os.environ.get("GN3_NUMBA", "1").strip().lower()
    return flag not in {"0", "false", "off", "no"}


NUMBA_ENABLED = False
_numba_njit = None
if _numba_requested():
    try:
        from numba import njit as _numba_njit

        NUMBA_ENABLED = True
    except ImportError:
        _numba_njit = None


if NUMBA_ENABLED:

    def njit(func=None, **kwargs):
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        if func is not None:
            return _numba_njit(**kwargs)(func)
        return _numba_njit(**kwargs)

else:

    def njit(func=None, **kwargs):  # kwargs ignored; mirrors the numba signature
        if func is not None:
            return func

        def wrap(f):
            return f

        return wrap
