"""Kernel backend selection.

Hot inner loops ship in two versions: a loop implementation compiled with
numba and a vectorized numpy implementation. The numba path is the default;
set ``SEQCT_NO_NUMBA=1`` (or run without numba installed) to select the
numpy path. Both versions are kept importable so tests and the benchmark
can compare them directly.
"""

import os

DISABLED = os.environ.get("SEQCT_NO_NUMBA", "").strip() not in ("", "0")

try:
    if DISABLED:
        raise ImportError("numba disabled via SEQCT_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        """No-op decorator so loop kernels stay importable without numba."""
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def backend():
    """Name of the active kernel backend, 'numba' or 'numpy'."""
    return "numba" if HAVE_NUMBA else "numpy"
