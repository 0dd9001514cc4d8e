"""Kernel dispatch: numba-compiled hot loops with a plain-NumPy fallback.

Set ``PROBEWALK_NO_JIT=1`` to skip numba entirely (debugging, or platforms
where numba is unavailable).  Both paths execute the same source, so results
are identical; only speed differs.  ``benchmarks/bench_kernels.py`` compares
the two.
"""

import os


def _jit_requested() -> bool:
    flag = os.environ.get("PROBEWALK_NO_JIT", "0").strip().lower()
    return flag not in ("1", "true", "yes", "on")


JIT_ENABLED = _jit_requested()

if JIT_ENABLED:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        JIT_ENABLED = False

MODE = "numba" if JIT_ENABLED else "numpy"


def maybe_jit(func):
    """Compile ``func`` with numba when enabled, otherwise return it as-is."""
    if JIT_ENABLED:
        return _njit(cache=True)(func)
    return func
