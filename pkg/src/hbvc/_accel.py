"""Switch between numba-compiled kernels and the pure numpy/python path.

Set ``HBVC_DISABLE_NUMBA=1`` in the environment (before import) to force the
fallback path everywhere. Both paths produce identical integer results.
"""

import os
import warnings

_DISABLED = os.environ.get("HBVC_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba

    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when numba is active, otherwise an identity decorator."""
    if HAS_NUMBA:
        return numba.njit(*args, cache=True, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def set_threads(n: int) -> int:
    """Cap worker threads used by compiled kernels; returns the effective count."""
    n = max(1, int(n))
    if HAS_NUMBA:
        n = min(n, numba.config.NUMBA_NUM_THREADS)
        with warnings.catch_warnings():
            # threading-layer probing warns about optional TBB versions
            warnings.simplefilter("ignore")
            numba.set_num_threads(n)
    return n
