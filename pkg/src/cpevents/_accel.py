"""Optional numba acceleration.

Set ``CPEVENTS_DISABLE_NUMBA=1`` to force the pure numpy kernels.
"""
import os

_disabled = os.environ.get("CPEVENTS_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _disabled:
        raise ImportError("numba disabled by CPEVENTS_DISABLE_NUMBA")
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False
    _njit = None


def njit(func):
    """Compile ``func`` in nopython mode when numba is usable, else return it as-is."""
    if not HAVE_NUMBA:
        return func
    return _njit(cache=True, nogil=True)(func)
