"""Kernel selection: compiled extension if importable, else pure Python.

Set ``PRUEFER_PURE_PYTHON=1`` to force the fallback.
"""
import os
import warnings

from . import _kernel_py

if os.environ.get("PRUEFER_PURE_PYTHON", "") not in ("", "0"):
    kernel = _kernel_py
else:
    try:
        from . import _kernel_cy as kernel
    except ImportError:  # extension not built
        warnings.warn(
            "pruefer: compiled kernel unavailable, using the pure-Python "
            "fallback (expect ~50x slower integrations)",
            RuntimeWarning,
            stacklevel=2,
        )
        kernel = _kernel_py

BACKEND = "cython" if kernel is not _kernel_py else "python"
