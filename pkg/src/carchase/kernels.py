"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
module takes over. ``CARCHASE_KERNELS=python`` forces the fallback and
``CARCHASE_KERNELS=compiled`` makes a missing extension an error.
"""
import os

from . import _pykernels

_choice = os.environ.get("CARCHASE_KERNELS", "auto").lower()

if _choice == "python":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = _pykernels

BACKEND = _impl.BACKEND
rs_distance = _impl.rs_distance
rs_table_values = _impl.rs_table_values
trilinear = _impl.trilinear

# path reconstruction is not hot; always served by the Python implementation
rs_candidates = _pykernels.rs_candidates
weighted_length = _pykernels.weighted_length
normalize_goal = _pykernels.normalize_goal
mod2pi = _pykernels.mod2pi
WORDS = _pykernels.WORDS


def as_flat(values):
    """Flatten a ``(nx, ny, nt)`` table into whatever ``trilinear`` indexes fastest."""
    import numpy as np

    arr = np.ascontiguousarray(values, dtype=np.float64).ravel()
    if BACKEND == "compiled":
        return arr
    return arr.tolist()
