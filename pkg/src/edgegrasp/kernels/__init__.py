"""Hot inner loops with two interchangeable backends.

The numba backend is used when numba imports cleanly; setting the environment
variable ``EDGEGRASP_NUMBA=0`` selects the pure numpy/scipy path instead. The
choice is made once at import time.
"""

import os

from . import _numpy

_want_numba = os.environ.get("EDGEGRASP_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

if _want_numba:
    try:
        from . import _numba as _impl
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _impl = _numpy
        BACKEND = "numpy"
else:
    _impl = _numpy
    BACKEND = "numpy"

nms = _impl.nms
hysteresis = _impl.hysteresis
median_fill_pass = _impl.median_fill_pass
raycast = _impl.raycast

__all__ = ["BACKEND", "nms", "hysteresis", "median_fill_pass", "raycast"]
