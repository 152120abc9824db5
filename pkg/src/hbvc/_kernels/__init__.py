"""Hot loops. Each kernel is compiled with numba unless HBVC_DISABLE_NUMBA is set."""
