"""Select the compiled core or its pure-Python twin.

Set ``WLANSIM_PURE=1`` to force the Python implementation.
"""
import os

if os.environ.get("WLANSIM_PURE", "") not in ("", "0"):
    from . import _core_py as _impl
else:
    try:
        from . import _core as _impl
    except ImportError:
        from . import _core_py as _impl

BACKEND = _impl.BACKEND
EventQueue = _impl.EventQueue
binom_tail = _impl.binom_tail
mixed_block_tail = _impl.mixed_block_tail
frame_error_prob = _impl.frame_error_prob
fec_frame_error_prob = _impl.fec_frame_error_prob

__all__ = [
    "BACKEND",
    "EventQueue",
    "binom_tail",
    "mixed_block_tail",
    "frame_error_prob",
    "fec_frame_error_prob",
]
