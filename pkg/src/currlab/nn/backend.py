"""Kernel backend selection.

Default is the numba backend when numba imports cleanly; set
CURRLAB_BACKEND=numpy (or call set_backend) to force the pure-numpy
fallback, e.g. for debugging or the backend benchmark.
"""

import os

_VALID = ("numba", "numpy")
_backend = None


def _default():
    name = os.environ.get("CURRLAB_BACKEND", "").strip().lower()
    if name in _VALID:
        return name
    try:
        import numba  # noqa: F401
        return "numba"
    except ImportError:
        return "numpy"


def get_backend():
    global _backend
    if _backend is None:
        _backend = _default()
    return _backend


def set_backend(name):
    global _backend
    if name not in _VALID:
        raise ValueError(f"unknown backend {name!r}; expected one of {_VALID}")
    _backend = name


def kernels():
    """Return the active kernel module."""
    if get_backend() == "numba":
        from currlab.nn import kernels_numba
        return kernels_numba
    from currlab.nn import kernels_numpy
    return kernels_numpy
