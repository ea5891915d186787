"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly, unless the environment
variable ``FLOWDYN_DISABLE_NUMBA`` is set to a truthy value, in which case
everything runs through :mod:`flowdyn.kernels.numpy_impl`.
"""
import logging
import os

from . import numpy_impl

log = logging.getLogger(__name__)

_TRUTHY = ("1", "true", "yes", "on")


def _load_numba():
    if os.environ.get("FLOWDYN_DISABLE_NUMBA", "").strip().lower() in _TRUTHY:
        return None
    try:
        from . import numba_impl
    except Exception as exc:  # pragma: no cover - depends on the install
        log.info("numba unavailable, using numpy kernels: %s", exc)
        return None
    return numba_impl


numba_impl = _load_numba()
BACKEND = "numba" if numba_impl is not None else "numpy"
_impl = numba_impl if numba_impl is not None else numpy_impl

hs_sweeps = _impl.hs_sweeps
hs_energy = _impl.hs_energy
bilinear_sample = _impl.bilinear_sample
cell_histograms = _impl.cell_histograms
neighbour_counts = numpy_impl.neighbour_counts

__all__ = [
    "BACKEND",
    "bilinear_sample",
    "cell_histograms",
    "hs_energy",
    "hs_sweeps",
    "numba_impl",
    "numpy_impl",
]
