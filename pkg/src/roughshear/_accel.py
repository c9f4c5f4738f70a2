"""JIT switch for the hot kernels.

Kernels in :mod:`roughshear.kernels` come in pairs: a numba-compiled loop and a
vectorised numpy twin. Set ``ROUGHSHEAR_NO_NUMBA=1`` in the environment (before
import) to force the numpy path, e.g. to cross-check results or when numba is
not installed.
"""
import os
import warnings


class PerformanceWarning(UserWarning):
    pass


def _env_disabled():
    return os.environ.get("ROUGHSHEAR_NO_NUMBA", "0").strip().lower() in ("1", "true", "yes")


try:
    if _env_disabled():
        raise ImportError("numba disabled by ROUGHSHEAR_NO_NUMBA")
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False
    if not _env_disabled():
        warnings.warn("numba is not available; falling back to numpy kernels",
                      PerformanceWarning)


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, otherwise a transparent no-op decorator."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func


def backend():
    return "numba" if HAVE_NUMBA else "numpy"


__all__ = ["njit", "HAVE_NUMBA", "PerformanceWarning", "backend"]
