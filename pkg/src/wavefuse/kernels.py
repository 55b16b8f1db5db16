"""Backend selection for the distance kernels.

The compiled extension is used when it imports cleanly; setting
``WAVEFUSE_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from wavefuse import _pykernels

if os.environ.get("WAVEFUSE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from wavefuse import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

min_sq_dists = _impl.min_sq_dists
update_min_sq_dists = _impl.update_min_sq_dists
farthest_first = _impl.farthest_first

__all__ = ["BACKEND", "min_sq_dists", "update_min_sq_dists", "farthest_first"]
