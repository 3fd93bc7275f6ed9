"""Kernel selection: the compiled extension when importable, numpy otherwise.

Set ``QGO_PURE_PYTHON=1`` to force the numpy implementation.
"""
import os

from . import _fallback

BACKEND = "python"
if os.environ.get("QGO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

rk4_statevector = _impl.rk4_statevector
rk4_master = _impl.rk4_master

__all__ = ["BACKEND", "rk4_statevector", "rk4_master"]
