"""Multi-stride frame pairing and a coarse-to-fine Horn-Schunck estimator.

The solver minimizes, per pyramid level and warp,

    E(u, v) = sum_p (Ix u + Iy v + It)^2 + alpha^2 sum_edges |w_p - w_q|^2

on intensities scaled to [0, 255], where (Ix, Iy, It) linearize the warped
second frame around the current flow.  Sweeps are red-black Gauss-Seidel,
which is exact block coordinate descent on E, so E is non-increasing.
"""
from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import MixedDimensions, NonFiniteValue, TooFewFrames
from .flow import FlowField, Source, VideoClip

log = logging.getLogger(__name__)

DEFAULT_STRIDES = (1, 2, 4, 6, 8, 12, 15, 30, 45)
_DERIV = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0

_calls = 0
_calls_lock = threading.Lock()


def call_count() -> int:
    """Number of :func:`estimate` invocations since the last reset."""
    return _calls


def reset_call_count() -> None:
    global _calls
    _calls = 0


@dataclass(frozen=True)
class StrideSet:
    strides: tuple = DEFAULT_STRIDES

    def __post_init__(self):
        s = tuple(int(x) for x in self.strides)
        if not s:
            raise ValueError("stride set is empty")
        if s[0] < 1 or any(b <= a for a, b in zip(s, s[1:])):
            raise ValueError(f"strides must be >= 1 and strictly increasing: {s}")
        object.__setattr__(self, "strides", s)

    def __iter__(self):
        return iter(self.strides)

    def __len__(self):
        return len(self.strides)

    @classmethod
    def parse(cls, text: str) -> "StrideSet":
        return cls(tuple(int(x) for x in text.split(",") if x.strip()))


@dataclass(frozen=True)
class EstimatorConfig:
    alpha: float = 15.0
    iterations: int = 100
    pyramid_levels: int = 4
    pyramid_scale: float = 0.5
    warps: int = 1

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.iterations < 1 or self.pyramid_levels < 1 or self.warps < 1:
            raise ValueError("iterations, pyramid_levels and warps must be >= 1")
        if not 0 < self.pyramid_scale < 1:
            raise ValueError("pyramid_scale must lie in (0, 1)")


def pair_frames(clip_or_count, strides: Iterable[int]) -> dict[int, list[tuple[int, int]]]:
    """Frame pairs per stride; strides that do not fit in the clip are dropped.

    Accepts a clip or a bare frame count.  Returns ``{stride: [(t, t+s), ...]}``
    holding only the surviving streams.
    """
    n = clip_or_count if isinstance(clip_or_count, (int, np.integer)) else clip_or_count.frame_count
    if n < 2:
        raise TooFewFrames(f"{n} frames, need at least 2")
    return {int(s): [(t, t + int(s)) for t in range(n - int(s))] for s in strides if int(s) < n}


# -- pyramid helpers --------------------------------------------------------


def _downsample(img: np.ndarray, scale: float) -> np.ndarray:
    sigma = 1.0 / np.sqrt(2.0 * scale) if scale < 1 else 0.0
    blurred = ndimage.gaussian_filter(img, sigma, mode="nearest")
    h, w = img.shape
    nh, nw = max(1, int(round(h * scale))), max(1, int(round(w * scale)))
    return _resize(blurred, nh, nw)


def _resize(img: np.ndarray, nh: int, nw: int) -> np.ndarray:
    h, w = img.shape
    # pixel-centre aligned sampling grid
    ys = (np.arange(nh) + 0.5) * (h / nh) - 0.5
    xs = (np.arange(nw) + 0.5) * (w / nw) - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return kernels.bilinear_sample(img, xx, yy, False)


def _pyramid(img: np.ndarray, levels: int, scale: float) -> list[np.ndarray]:
    pyr = [img]
    for _ in range(levels - 1):
        nxt = _downsample(pyr[-1], scale)
        if min(nxt.shape) < 4:
            break
        pyr.append(nxt)
    return pyr


def _gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gx = ndimage.correlate1d(img, _DERIV, axis=1, mode="nearest")
    gy = ndimage.correlate1d(img, _DERIV, axis=0, mode="nearest")
    return gx, gy


def _warp(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    h, w = img.shape
    yy, xx = np.indices((h, w), dtype=np.float64)
    return kernels.bilinear_sample(img, xx + u, yy + v, False)


def linearize(a: np.ndarray, b: np.ndarray, u0: np.ndarray, v0: np.ndarray):
    """Data-term coefficients around the flow (u0, v0).

    Returns (ix, iy, it) such that the brightness residual at flow (u, v)
    is approximately ``ix*u + iy*v + it``.
    """
    bw = _warp(b, u0, v0)
    ax, ay = _gradients(a)
    bx, by = _gradients(bw)
    ix = 0.5 * (ax + bx)
    iy = 0.5 * (ay + by)
    it = (bw - a) - ix * u0 - iy * v0
    return ix, iy, it


def horn_schunck(ix, iy, it, u, v, alpha: float, iterations: int, energy_log: Optional[list] = None):
    """Run ``iterations`` sweeps on (u, v) in place.

    With ``energy_log`` a list, the energy before the first sweep and after
    every sweep is appended to it.
    """
    a2 = float(alpha) ** 2
    if energy_log is None:
        kernels.hs_sweeps(u, v, ix, iy, it, a2, int(iterations))
        return u, v
    energy_log.append(kernels.hs_energy(u, v, ix, iy, it, a2))
    for _ in range(int(iterations)):
        kernels.hs_sweeps(u, v, ix, iy, it, a2, 1)
        energy_log.append(kernels.hs_energy(u, v, ix, iy, it, a2))
    return u, v


def estimate(
    frame_a: np.ndarray,
    frame_b: np.ndarray,
    cfg: Optional[EstimatorConfig] = None,
    *,
    stride: int = 1,
    energy_log: Optional[list] = None,
) -> FlowField:
    """Dense flow carrying ``frame_a`` onto ``frame_b``.

    ``energy_log``, if given, receives the per-sweep energies of the last
    warp at the finest level.
    """
    global _calls
    with _calls_lock:
        _calls += 1
    cfg = cfg or EstimatorConfig()
    a = np.asarray(frame_a, dtype=np.float64)
    b = np.asarray(frame_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise MixedDimensions(f"frames {a.shape} and {b.shape} differ")
    a = a * 255.0
    b = b * 255.0
    pa = _pyramid(a, cfg.pyramid_levels, cfg.pyramid_scale)
    pb = _pyramid(b, cfg.pyramid_levels, cfg.pyramid_scale)
    u = np.zeros(pa[-1].shape)
    v = np.zeros(pa[-1].shape)
    for level in range(len(pa) - 1, -1, -1):
        la, lb = pa[level], pb[level]
        if u.shape != la.shape:
            fy = la.shape[0] / u.shape[0]
            fx = la.shape[1] / u.shape[1]
            u = _resize(u, *la.shape) * fx
            v = _resize(v, *la.shape) * fy
        for warp in range(cfg.warps):
            ix, iy, it = linearize(la, lb, u, v)
            log_here = energy_log if (level == 0 and warp == cfg.warps - 1) else None
            u = np.ascontiguousarray(u)
            v = np.ascontiguousarray(v)
            horn_schunck(ix, iy, it, u, v, cfg.alpha, cfg.iterations, log_here)
            if not (np.isfinite(u).all() and np.isfinite(v).all()):
                raise NonFiniteValue(
                    f"solver diverged at level {level}, warp {warp} (alpha={cfg.alpha}, shape={la.shape})"
                )
    return FlowField(u, v, stride, Source.ESTIMATED)


def estimate_clip(
    clip: VideoClip,
    strides: Iterable[int],
    cfg: Optional[EstimatorConfig] = None,
    jobs: int = 1,
) -> list[FlowField]:
    """One field per (t, t+s) pair from :func:`pair_frames`, ordered by stride then t."""
    pairs = [(s, t0, t1) for s, ps in pair_frames(clip, strides).items() for t0, t1 in ps]

    def run(p):
        s, t0, t1 = p
        return estimate(clip.frames[t0], clip.frames[t1], cfg, stride=s)

    if jobs > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(run, pairs))
    return [run(p) for p in pairs]
