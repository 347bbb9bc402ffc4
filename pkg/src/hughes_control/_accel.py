"""Select the numba or pure-numpy kernel path.

Set ``HUGHES_CONTROL_NO_NUMBA=1`` to force the numpy fallback.
"""

import os

_flag = os.environ.get("HUGHES_CONTROL_NO_NUMBA", "").strip().lower()

try:
    if _flag in ("1", "true", "yes", "on"):
        raise ImportError("numba disabled by HUGHES_CONTROL_NO_NUMBA")
    from numba import njit as _njit

    NUMBA_ENABLED = True
except ImportError:
    _njit = None
    NUMBA_ENABLED = False


def jit(fn):
    """Compile ``fn`` with numba when available, else return it unchanged."""
    if _njit is None:
        return fn
    return _njit(cache=True, nogil=True)(fn)


def set_threads(n):
    if n is None:
        return
    if NUMBA_ENABLED:
        import warnings

        import numba

        with warnings.catch_warnings():
            # the threading-layer probe warns about old TBB builds it will not use
            warnings.simplefilter("ignore", numba.NumbaWarning)
            numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
