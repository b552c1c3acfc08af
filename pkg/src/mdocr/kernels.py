"""Backend selection for the edit-distance kernels.

The compiled core (``mdocr._lev``) is used when it was built; otherwise the
pure-Python module is loaded. Set ``MDOCR_PURE_PYTHON=1`` to force the
fallback, e.g. for benchmarking.
"""

from __future__ import annotations

import os

if os.environ.get("MDOCR_PURE_PYTHON", "") not in ("", "0"):
    from mdocr import _lev_py as _impl
else:
    try:
        from mdocr import _lev as _impl
    except ImportError:
        from mdocr import _lev_py as _impl

BACKEND: str = _impl.BACKEND
str_distance = _impl.str_distance
int_distance = _impl.int_distance
int_similarity = _impl.int_similarity

__all__ = ["BACKEND", "int_distance", "int_similarity", "str_distance"]
