"""Select between numba-compiled kernels and the pure-numpy fallback.

The choice is made once at import time from ``HYPERFIT_BACKEND``
(``numba`` or ``numpy``).  When unset, numba is used if importable.
``HYPERFIT_DISABLE_NUMBA=1`` is accepted as a shorthand for ``numpy``.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _requested():
    if os.environ.get("HYPERFIT_DISABLE_NUMBA", "").strip() in ("1", "true", "yes"):
        return "numpy"
    value = os.environ.get("HYPERFIT_BACKEND", "").strip().lower()
    if value in ("", "auto"):
        return "numba" if numba is not None else "numpy"
    if value not in ("numba", "numpy"):
        raise ImportError(f"HYPERFIT_BACKEND must be 'numba' or 'numpy', got {value!r}")
    if value == "numba" and numba is None:
        raise ImportError("HYPERFIT_BACKEND=numba but numba is not installed")
    return value


BACKEND = _requested()
HAS_NUMBA = numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    return numba.njit(*args, **kwargs)
