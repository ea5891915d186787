"""Optical-flow features (OFFs): magnitude-weighted orientation histograms
and per-cell magnitude statistics over a (corrected) flow stream."""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .correction import CorrectionParams, correct
from .errors import EmptyStream, MixedDimensions
from .estimator import EstimatorConfig, estimate, pair_frames
from .flow import FlowField, VideoClip

log = logging.getLogger(__name__)

DEFAULT_BINS = 8
DEFAULT_GRID = (4, 4)
CACHE_ENV = "FLOWDYN_CACHE_DIR"

# Named estimator presets play the role of distinct flow methods.
FLOW_TYPES = {
    "hs": EstimatorConfig(alpha=15.0),
    "hs-sharp": EstimatorConfig(alpha=6.0),
    "hs-smooth": EstimatorConfig(alpha=40.0),
}


class Descriptor(str, Enum):
    HOF = "HOF"
    MAGSTAT = "MAGSTAT"
    COMBINED = "COMBINED"


@dataclass(frozen=True, eq=False)
class FlowFeature:
    vector: np.ndarray
    descriptor: Descriptor
    provenance: tuple = ("", 1, 1.0)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


def feature_dim(descriptor, bins: int = DEFAULT_BINS, grid=DEFAULT_GRID) -> int:
    cells = grid[0] * grid[1]
    d = Descriptor(descriptor)
    return {Descriptor.HOF: cells * bins, Descriptor.MAGSTAT: cells * 3, Descriptor.COMBINED: cells * (bins + 3)}[d]


def l2_normalize(x: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(x)
    return x / n if n > 0 else np.zeros_like(x)


def _check_stream(fields: Sequence[FlowField]):
    if not fields:
        raise EmptyStream("no flow fields to describe")
    shape = fields[0].shape
    for f in fields:
        if f.shape != shape:
            raise MixedDimensions(f"field {f.shape} in a stream of {shape}")
    return shape


def cell_index(height: int, width: int, grid) -> np.ndarray:
    """Row-major cell id of every pixel for a (gx, gy) grid."""
    gx, gy = grid
    cx = (np.arange(width) * gx) // width
    cy = (np.arange(height) * gy) // height
    return cy[:, None] * gx + cx[None, :]


def orientation_bins(phi: np.ndarray, bins: int) -> np.ndarray:
    """Bin of each angle; bin k is centred on ``2*pi*k/bins``."""
    return np.mod(np.floor(phi / (2 * np.pi / bins) + 0.5).astype(np.int64), bins)


def hof_raw(fields: Sequence[FlowField], bins: int = DEFAULT_BINS, grid=DEFAULT_GRID) -> np.ndarray:
    h, w = _check_stream(fields)
    if bins < 4:
        raise ValueError("need at least 4 orientation bins")
    cells = cell_index(h, w, grid)
    ncells = grid[0] * grid[1]
    hist = np.zeros((ncells, bins))
    for f in fields:
        u = f.u.astype(np.float64)
        v = f.v.astype(np.float64)
        # same angle convention as the correction stage
        b = orientation_bins(np.arctan2(u, v), bins)
        hist += kernels.cell_histograms(b, cells, np.hypot(u, v), ncells, bins)
    return (hist / len(fields)).ravel()


def hof(fields: Sequence[FlowField], bins: int = DEFAULT_BINS, grid=DEFAULT_GRID, provenance=("", 1, 1.0)) -> FlowFeature:
    return FlowFeature(l2_normalize(hof_raw(fields, bins, grid)), Descriptor.HOF, tuple(provenance))


def magstats_raw(fields: Sequence[FlowField], grid=DEFAULT_GRID) -> np.ndarray:
    h, w = _check_stream(fields)
    cells = cell_index(h, w, grid).ravel()
    ncells = grid[0] * grid[1]
    mags = np.stack([f.magnitude().ravel() for f in fields])
    out = np.zeros((ncells, 3))
    for c in range(ncells):
        m = mags[:, cells == c]
        out[c] = (m.mean(), m.std(), m.max())
    return out.ravel()


def magstats(fields: Sequence[FlowField], grid=DEFAULT_GRID, provenance=("", 1, 1.0)) -> FlowFeature:
    return FlowFeature(l2_normalize(magstats_raw(fields, grid)), Descriptor.MAGSTAT, tuple(provenance))


def describe(fields, descriptor=Descriptor.COMBINED, bins=DEFAULT_BINS, grid=DEFAULT_GRID, provenance=("", 1, 1.0)) -> FlowFeature:
    d = Descriptor(descriptor)
    if d is Descriptor.HOF:
        return hof(fields, bins, grid, provenance)
    if d is Descriptor.MAGSTAT:
        return magstats(fields, grid, provenance)
    vec = np.concatenate([hof(fields, bins, grid).vector, magstats(fields, grid).vector])
    return FlowFeature(l2_normalize(vec), d, tuple(provenance))


# -- flow retrieval ----------------------------------------------------------


def clip_digest(clip: VideoClip) -> str:
    h = hashlib.sha1()
    for f in clip.frames:
        h.update(np.ascontiguousarray(f).tobytes())
    return h.hexdigest()[:16]


class FlowStore:
    """Per-(clip, flow type, stride) flow streams, estimated on demand.

    Flow types are names in ``presets`` (estimator configurations) or streams
    registered with :meth:`add` (for example fields ingested from ``.flo``
    files).  When ``cache_dir`` is set (default: the ``FLOWDYN_CACHE_DIR``
    environment variable) estimated streams are also kept on disk.
    """

    def __init__(self, presets: Optional[dict] = None, cache_dir=None, jobs: int = 1):
        self.presets = dict(FLOW_TYPES if presets is None else presets)
        cache_dir = cache_dir if cache_dir is not None else os.environ.get(CACHE_ENV)
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.jobs = jobs
        self._mem: dict = {}
        self._digests: dict = {}

    def add(self, clip_id: str, flow_type: str, stride: int, fields: Sequence[FlowField]) -> None:
        self._mem[(clip_id, flow_type, int(stride))] = list(fields)

    def _key(self, clip: VideoClip):
        return clip.clip_id or str(id(clip))

    def _disk_path(self, clip, flow_type, stride) -> Optional[Path]:
        if self.cache_dir is None:
            return None
        key = id(clip)
        if key not in self._digests:
            self._digests[key] = clip_digest(clip)
        cfg = self.presets[flow_type]
        tag = hashlib.sha1(repr(cfg).encode()).hexdigest()[:8]
        return self.cache_dir / f"{self._digests[key]}_{flow_type}_{tag}_s{stride}.npz"

    def get(self, clip: VideoClip, flow_type: str, stride: int) -> list[FlowField]:
        k = (self._key(clip), flow_type, int(stride))
        if k in self._mem:
            return self._mem[k]
        if flow_type not in self.presets:
            raise KeyError(f"unknown flow type {flow_type!r} for clip {k[0]}")
        path = self._disk_path(clip, flow_type, stride)
        if path is not None and path.exists():
            z = np.load(path)
            fields = [FlowField(u, v, stride) for u, v in zip(z["u"], z["v"])]
        else:
            fields = self._estimate(clip, flow_type, int(stride))
            if path is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
                np.savez(path, u=np.stack([f.u for f in fields]), v=np.stack([f.v for f in fields]))
        self._mem[k] = fields
        return fields

    def _estimate(self, clip, flow_type, stride):
        pairs = pair_frames(clip, [stride]).get(stride, [])
        cfg = self.presets[flow_type]
        run = lambda p: estimate(clip.frames[p[0]], clip.frames[p[1]], cfg, stride=stride)  # noqa: E731
        if self.jobs > 1 and len(pairs) > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(self.jobs) as pool:
                return list(pool.map(run, pairs))
        return [run(p) for p in pairs]


def featurize_stream(
    clip: VideoClip,
    flow_type: str,
    stride: int,
    params: CorrectionParams,
    descriptor=Descriptor.COMBINED,
    *,
    store: Optional[FlowStore] = None,
    bins: int = DEFAULT_BINS,
    grid=DEFAULT_GRID,
    stride_normalize: bool = False,
) -> FlowFeature:
    """Estimate (or fetch) the stride stream, correct every field, describe.

    ``stride_normalize`` divides displacements by the stride first; it
    has no effect on the default descriptors, which are scale invariant.
    """
    store = store or FlowStore()
    fields = store.get(clip, flow_type, stride)
    if not fields:
        raise EmptyStream(f"stride {stride} dropped for {clip.frame_count}-frame clip {clip.clip_id}")
    if stride_normalize and stride != 1:
        fields = [FlowField(f.u / stride, f.v / stride, f.stride, f.source) for f in fields]
    corrected = [correct(f, params) for f in fields]
    return describe(corrected, descriptor, bins, grid, (flow_type, int(stride), float(params.gamma)))


# -- feature store -----------------------------------------------------------


def write_feature(feature: FlowFeature, path, clip_id: str = "", **extra) -> None:
    """One record: a JSON header line, then the little-endian float32 vector."""
    ftype, stride, gamma = feature.provenance
    header = {
        "clip_id": clip_id,
        "flow_type": ftype,
        "stride": int(stride),
        "gamma": float(gamma),
        "descriptor": Descriptor(feature.descriptor).value,
        "dim": int(feature.dim),
        "dtype": "<f4",
    }
    header.update(extra)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.asarray(feature.vector, "<f4").tobytes())


def read_feature(path) -> tuple[FlowFeature, dict]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl])
    vec = np.frombuffer(raw, "<f4", header["dim"], nl + 1).astype(np.float64)
    prov = (header["flow_type"], header["stride"], header["gamma"])
    return FlowFeature(vec, Descriptor(header["descriptor"]), prov), header


def feature_filename(clip_id: str, flow_type: str, stride: int, gamma: float, descriptor) -> str:
    return f"{clip_id}__{flow_type}__s{int(stride)}__g{gamma:g}__{Descriptor(descriptor).value}.feat"
