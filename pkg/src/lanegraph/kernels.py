"""Hot-kernel dispatch.

The compiled extension is preferred; the numpy fallback is selected at import
when the extension is missing or ``LANEGRAPH_PURE_PYTHON`` is set.
"""
import os

from lanegraph import _pykernels

try:
    if os.environ.get("LANEGRAPH_PURE_PYTHON"):
        raise ImportError("pure-python backend forced")
    from lanegraph import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"


def get_backend(name):
    """Return the kernel module for ``"python"`` or ``"cython"``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from lanegraph import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


bool_spgemm = _impl.bool_spgemm
segment_sum = _impl.segment_sum
segment_max = _impl.segment_max
scatter_add_rows = _impl.scatter_add_rows
polyline_min_dist = _impl.polyline_min_dist
