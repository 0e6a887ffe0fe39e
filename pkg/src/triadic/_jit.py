"""JIT switch.

Hot kernels are written once in the numba-compatible subset of Python.  With
numba available they are compiled with ``njit``; setting ``TRIADIC_NO_JIT=1``
(or running without numba) leaves them as plain Python operating on numpy
arrays.  Both paths consume the random stream identically.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

JIT_DISABLED_BY_ENV = os.environ.get("TRIADIC_NO_JIT", "").strip() not in ("", "0")
JIT_ENABLED = numba is not None and not JIT_DISABLED_BY_ENV


def njit(func=None, **kwargs):
    """``numba.njit`` when enabled, identity otherwise."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        if JIT_ENABLED:
            return numba.njit(**kwargs)(f)
        return f

    if func is None:
        return wrap
    return wrap(func)


def backend_name():
    return f"numba-{numba.__version__}" if JIT_ENABLED else "python"
