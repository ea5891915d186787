"""Flow dynamics correction by power normalization of the flow magnitude.

A field (u, v) is split into a normalized magnitude map and an angle map,
the magnitude is passed through ``m -> 1 - (1 - m) ** gamma`` and the field
is rebuilt from the new magnitude and the untouched angle.  ``gamma > 1``
lifts weak motion towards the strongest one; ``0 < gamma < 1`` keeps only
the dominant motion.

Angle convention: ``phi = atan2(u, v)`` so that ``u = m sin(phi)`` and
``v = m cos(phi)`` rebuild the field exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidGamma, NonFiniteValue
from .flow import FlowField, Source

DOMINANT_BINS = 64


class Rescale(str, Enum):
    RESTORE_SCALE = "restore_scale"
    KEEP_NORMALIZED = "keep_normalized"


@dataclass(frozen=True)
class CorrectionParams:
    gamma: float = 1.0
    subtract_dominant: bool = False
    rescale: Rescale = Rescale.RESTORE_SCALE

    def __post_init__(self):
        _check_gamma(self.gamma)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "rescale", Rescale(self.rescale))


@dataclass(frozen=True, eq=False)
class PolarFlow:
    """Normalized magnitude ``m`` in [0, 1], angle ``phi`` in (-pi, pi].

    ``scale`` converts ``m`` back to pixels (the raw maximum magnitude, or 1
    for an all-zero field).
    """

    m: np.ndarray
    phi: np.ndarray
    scale: float = 1.0
    stride: int = 1

    @property
    def shape(self):
        return self.m.shape

    @property
    def height(self) -> int:
        return self.m.shape[0]

    @property
    def width(self) -> int:
        return self.m.shape[1]

    def replace_magnitude(self, m: np.ndarray) -> "PolarFlow":
        return PolarFlow(m, self.phi, self.scale, self.stride)


def _check_gamma(gamma) -> None:
    if not (np.isfinite(gamma) and gamma > 0):
        raise InvalidGamma(f"gamma must be a finite positive number, got {gamma!r}")


def decompose(field: FlowField) -> PolarFlow:
    u = np.asarray(field.u, dtype=np.float64)
    v = np.asarray(field.v, dtype=np.float64)
    if not (np.isfinite(u).all() and np.isfinite(v).all()):
        raise NonFiniteValue("cannot decompose a non-finite field")
    m_raw = np.hypot(u, v)
    phi = np.arctan2(u, v)
    # keep phi in (-pi, pi]: atan2 returns -pi for u == -0.0, v < 0
    phi[phi == -np.pi] = np.pi
    phi[m_raw == 0] = 0.0
    peak = float(m_raw.max()) if m_raw.size else 0.0
    scale = peak if peak > 0 else 1.0
    m = np.minimum(m_raw / scale, 1.0)
    return PolarFlow(m, phi, scale, getattr(field, "stride", 1))


def power_normalize_values(m, gamma: float) -> np.ndarray:
    """``sign(m) * (1 - (1 - |m|) ** gamma)`` element-wise, for |m| <= 1.

    Evaluated as ``-expm1(gamma * log1p(-|m|))`` which keeps full relative
    precision for tiny magnitudes.  ``gamma == 1`` returns the input as is.
    """
    _check_gamma(gamma)
    m = np.asarray(m, dtype=np.float64)
    if gamma == 1.0:
        return m.copy()
    a = np.abs(m)
    with np.errstate(divide="ignore"):
        out = -np.expm1(gamma * np.log1p(-a))
    return np.sign(m) * out


def power_normalize(polar: PolarFlow, gamma: float) -> PolarFlow:
    return polar.replace_magnitude(power_normalize_values(polar.m, gamma))


def dominant_magnitude(m: np.ndarray, bins: int = DOMINANT_BINS) -> float:
    """Most frequent normalized magnitude.

    The modal bin of a ``bins``-bin histogram over [0, 1] is found (lowest
    bin wins ties) and the median of the samples inside it is returned.
    """
    m = np.asarray(m, dtype=np.float64).ravel()
    if m.size == 0:
        return 0.0
    idx = np.minimum((m * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    mode = int(np.argmax(counts))
    return float(np.median(m[idx == mode]))


def subtract_dominant(polar: PolarFlow) -> PolarFlow:
    dom = dominant_magnitude(polar.m)
    return polar.replace_magnitude(np.clip(polar.m - dom, 0.0, 1.0))


def recompose(polar: PolarFlow, rescale: Rescale = Rescale.RESTORE_SCALE) -> FlowField:
    s = polar.scale if Rescale(rescale) is Rescale.RESTORE_SCALE else 1.0
    mag = polar.m * s
    u = mag * np.sin(polar.phi)
    v = mag * np.cos(polar.phi)
    return FlowField(u, v, polar.stride, Source.CORRECTED)


def correct(field: FlowField, params: CorrectionParams, trace=None) -> FlowField:
    """decompose -> [subtract_dominant] -> power_normalize -> recompose.

    If ``trace`` is a list, the name of every stage is appended as it runs.
    """
    polar = decompose(field)
    if trace is not None:
        trace.append("decompose")
    if params.subtract_dominant:
        polar = subtract_dominant(polar)
        if trace is not None:
            trace.append("subtract_dominant")
    polar = power_normalize(polar, params.gamma)
    if trace is not None:
        trace.append("power_normalize")
    out = recompose(polar, params.rescale)
    if trace is not None:
        trace.append("recompose")
    return out
