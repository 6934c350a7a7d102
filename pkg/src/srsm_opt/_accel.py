"""Numba switch.

Hot kernels are compiled with ``numba.njit`` when numba is importable and
``SRSM_OPT_NUMBA`` is not set to ``0``/``false``/``off``.  Otherwise every
kernel falls back to its vectorized numpy twin in :mod:`srsm_opt.kernels`.
"""

import os

_FLAG = os.environ.get("SRSM_OPT_NUMBA", "1").strip().lower()

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and _FLAG not in ("0", "false", "off", "no")


def optional_njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    kwargs.setdefault("cache", True)

    def decorator(func):
        if NUMBA_AVAILABLE:
            return numba.njit(*args, **kwargs)(func)
        return func

    return decorator
