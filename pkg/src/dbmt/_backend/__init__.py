"""Kernel backend selection: compiled extension if available, NumPy otherwise.

Set the environment variable DBMT_PURE_PYTHON=1 to force the NumPy fallback
(useful for benchmarking and debugging).
"""
import os

from . import _py

if os.environ.get("DBMT_PURE_PYTHON"):
    _impl = _py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _py
        BACKEND = "python"

kalman_smooth_diag = _impl.kalman_smooth_diag
laplace_smooth_diag = _impl.laplace_smooth_diag

__all__ = ["kalman_smooth_diag", "laplace_smooth_diag", "BACKEND"]
