"""JIT switch for the numeric kernels.

Kernels are written once in numba-compatible numpy. They are compiled with
``numba.njit`` unless ``LGEKF_DISABLE_JIT`` is set to a truthy value (or numba
is not importable), in which case the very same functions run as plain numpy.
The flag is read once at import time.
"""

import os

_FLAG = os.environ.get("LGEKF_DISABLE_JIT", "").strip().lower()
JIT_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and not JIT_DISABLED


def jit(fn):
    """Compile ``fn`` in nopython mode when numba is enabled."""
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
