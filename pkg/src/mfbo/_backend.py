"""Pick the compiled acquisition kernels when available.

Set ``MFBO_PURE_PYTHON=1`` to force the numpy implementation.
"""
import os

from . import _kernels_py

kernels = _kernels_py
NAME = "python"

if os.environ.get("MFBO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        kernels = _compiled
        NAME = "cython"


def get(name=None):
    """Return the kernel module called ``name`` ("cython"/"python"), default the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
