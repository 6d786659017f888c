"""Selects the compiled kernels when available, the numpy ones otherwise.

Set ``CIRCFILTER_PURE_PYTHON=1`` to force the numpy implementation.
"""
import os

from . import _fallback

compiled = None
if not os.environ.get("CIRCFILTER_PURE_PYTHON"):
    try:
        from . import _kernels as compiled
    except ImportError:
        compiled = None

kernels = compiled if compiled is not None else _fallback
BACKEND = kernels.NAME


def get(name=None):
    """Return the kernel module called ``name`` ("compiled" or "python")."""
    if name is None:
        return kernels
    if name == "python":
        return _fallback
    if name == "compiled":
        if compiled is None:
            raise ImportError("compiled kernels are not available")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
