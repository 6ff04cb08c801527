"""Pick the compiled kernels when importable, else the pure-Python ones.

Set ``FONBW_BACKEND=python`` to force the fallback (used by the benchmark and
the cross-backend tests).
"""
import os

from . import _kernels_py

kernels = _kernels_py
NAME = "python"

if os.environ.get("FONBW_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        kernels = _compiled
        NAME = "cython"


def get(name: str | None = None):
    """Kernel module by name (``"cython"``/``"python"``); default is the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
