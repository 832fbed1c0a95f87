"""Numba switch for the trajectory kernels.

Set ``EITNOISE_DISABLE_NUMBA=1`` to force the vectorised numpy path even when
numba is installed.
"""

from __future__ import annotations

import os

ENV_FLAG = "EITNOISE_DISABLE_NUMBA"


def _disabled_by_env() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


try:
    if _disabled_by_env():
        raise ImportError
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


def use_numba() -> bool:
    """True when the compiled kernels are active for this process."""
    return NUMBA_AVAILABLE
