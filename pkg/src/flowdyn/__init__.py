"""Multi-stride, power-normalized optical-flow features for action recognition.

Set ``FLOWDYN_DISABLE_NUMBA=1`` before import to run the pure-numpy kernels.
"""
from .errors import FlowDynError
from .flow import FlowField, Source, VideoClip, read_flo, write_flo
from .correction import CorrectionParams, Rescale, correct
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CorrectionParams",
    "FlowDynError",
    "FlowField",
    "Rescale",
    "Source",
    "VideoClip",
    "correct",
    "read_flo",
    "write_flo",
]
