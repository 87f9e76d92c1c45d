"""Hot-kernel dispatch: compiled extension when available, numpy fallback.

Set FVVREN_PURE_PYTHON=1 to force the fallback (used by the parity tests
and the benchmark).
"""

import os

from . import _pykernels

if os.environ.get("FVVREN_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = _impl.BACKEND
ray_grid_intervals = _impl.ray_grid_intervals

__all__ = ["BACKEND", "ray_grid_intervals"]
