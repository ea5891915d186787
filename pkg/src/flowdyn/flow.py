"""Flow-field and video-clip types, Middlebury ``.flo`` I/O and frame loading."""
from __future__ import annotations

import glob
import json
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BadMagic,
    DecodeFailure,
    DimensionOverflow,
    IoFailure,
    MixedDimensions,
    NonFiniteValue,
    TooFewFrames,
    TruncatedFile,
)

FLO_MAGIC = 202021.25
MAX_DIM = 100_000
# Rec.601 luma
_LUMA = np.array([0.299, 0.587, 0.114])


class Source(str, Enum):
    ESTIMATED = "estimated"
    INGESTED = "ingested"
    CORRECTED = "corrected"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float32)
    a.setflags(write=False)
    return a


def _check_dims(width: int, height: int) -> None:
    if not (0 < width <= MAX_DIM and 0 < height <= MAX_DIM):
        raise DimensionOverflow(f"flow dimensions {width}x{height} out of range")


@dataclass(frozen=True, eq=False)
class FlowField:
    """Dense displacement field; ``u`` and ``v`` are (height, width) float32.

    ``u`` is the horizontal (column) displacement and ``v`` the vertical (row)
    displacement, both in pixels per frame gap.
    """

    u: np.ndarray
    v: np.ndarray
    stride: int = 1
    source: Source = Source.ESTIMATED

    def __post_init__(self):
        u = np.asarray(self.u)
        v = np.asarray(self.v)
        if u.ndim != 2 or u.shape != v.shape:
            raise MixedDimensions(f"u {u.shape} and v {v.shape} must be equal 2-D shapes")
        _check_dims(u.shape[1], u.shape[0])
        u = _frozen(u)
        v = _frozen(v)
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise NonFiniteValue("flow field contains NaN or Inf")
        if int(self.stride) < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "stride", int(self.stride))
        object.__setattr__(self, "source", Source(self.source))

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    @classmethod
    def zeros(cls, height: int, width: int, stride: int = 1, source=Source.ESTIMATED) -> "FlowField":
        z = np.zeros((height, width), np.float32)
        return cls(z, z, stride, source)

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u.astype(np.float64), self.v.astype(np.float64))

    def same_values(self, other: "FlowField") -> bool:
        """Bitwise equality of the displacement arrays."""
        return (
            self.shape == other.shape
            and self.u.tobytes() == other.u.tobytes()
            and self.v.tobytes() == other.v.tobytes()
        )


@dataclass(frozen=True, eq=False)
class VideoClip:
    """Grayscale frames with luminance in [0, 1], all of one size."""

    frames: tuple
    label: Optional[int] = None
    clip_id: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        frames = tuple(_frozen_f64(f) for f in self.frames)
        if not frames:
            raise TooFewFrames("clip has no frames")
        shape = frames[0].shape
        for f in frames:
            if f.ndim != 2:
                raise MixedDimensions("frames must be 2-D luminance images")
            if f.shape != shape:
                raise MixedDimensions(f"frame of shape {f.shape} in a clip of {shape}")
        object.__setattr__(self, "frames", frames)

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].shape[0]

    @property
    def width(self) -> int:
        return self.frames[0].shape[1]


def _frozen_f64(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _sidecar(path) -> Path:
    return Path(str(path) + ".json")


def read_flo(path, stride: Optional[int] = None) -> FlowField:
    """Read a Middlebury ``.flo`` file.

    The stride comes from ``stride`` if given, else from a ``<path>.json``
    sidecar if present, else defaults to 1.
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if len(raw) < 12:
        raise TruncatedFile(f"{path}: {len(raw)} bytes, header needs 12")
    magic = np.frombuffer(raw, "<f4", 1, 0)[0]
    if magic != np.float32(FLO_MAGIC):
        raise BadMagic(f"{path}: tag {magic!r} is not {FLO_MAGIC}")
    width, height = (int(x) for x in np.frombuffer(raw, "<i4", 2, 4))
    _check_dims(width, height)
    n = width * height * 2
    if len(raw) - 12 < n * 4:
        raise TruncatedFile(f"{path}: payload holds {(len(raw) - 12) // 4} floats, expected {n}")
    data = np.frombuffer(raw, "<f4", n, 12).reshape(height, width, 2)
    if stride is None:
        side = _sidecar(path)
        stride = json.loads(side.read_text()).get("stride", 1) if side.exists() else 1
    return FlowField(data[..., 0], data[..., 1], stride, Source.INGESTED)


def write_flo(field: FlowField, path, sidecar: Optional[dict] = None) -> None:
    """Write ``field`` in the Middlebury layout (little-endian).

    A ``<path>.json`` sidecar is written when the stride is not 1 or when
    extra provenance is passed in ``sidecar``.
    """
    u = np.asarray(field.u)
    v = np.asarray(field.v)
    if u.ndim != 2 or u.shape != v.shape:
        raise MixedDimensions("u and v must share a 2-D shape")
    _check_dims(u.shape[1], u.shape[0])
    if not (np.isfinite(u).all() and np.isfinite(v).all()):
        raise NonFiniteValue("refusing to write non-finite flow")
    h, w = u.shape
    payload = np.empty((h, w, 2), "<f4")
    payload[..., 0] = u
    payload[..., 1] = v
    header = np.array([FLO_MAGIC], "<f4").tobytes() + np.array([w, h], "<i4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload.tobytes())
        meta = dict(sidecar or {})
        stride = getattr(field, "stride", 1)
        if stride != 1 or meta:
            meta.setdefault("stride", stride)
            meta.setdefault("source", Source(getattr(field, "source", Source.ESTIMATED)).value)
            _sidecar(path).write_text(json.dumps(meta, sort_keys=True))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def to_luminance(img: np.ndarray) -> np.ndarray:
    """Reduce an integer or float image to float luminance in [0, 1]."""
    a = np.asarray(img)
    if a.dtype == np.uint8:
        scale = 255.0
    elif a.dtype == np.uint16:
        scale = 65535.0
    elif np.issubdtype(a.dtype, np.integer):
        scale = float(max(int(a.max()), 1)) if a.max() > 255 else 255.0
    else:
        scale = 1.0
    a = a.astype(np.float64) / scale
    if a.ndim == 3:
        if a.shape[2] == 4:
            a = a[..., :3]
        if a.shape[2] == 3:
            a = a @ _LUMA
        elif a.shape[2] == 1:
            a = a[..., 0]
        else:
            raise DecodeFailure(f"unsupported channel count {a.shape[2]}")
    return np.clip(a, 0.0, 1.0)


def _decode(path: str) -> np.ndarray:
    from PIL import Image

    try:
        with Image.open(path) as im:
            if im.mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.array(im, dtype=np.int64)
                arr = arr.astype(np.uint16) if arr.max() <= 65535 else arr
                return to_luminance(arr.astype(np.uint16))
            if im.mode == "P":
                im = im.convert("RGB")
            return to_luminance(np.array(im))
    except (OSError, ValueError) as exc:
        raise DecodeFailure(f"{path}: {exc}") from exc


def load_frames(directory, pattern: str = "*.png", label: Optional[int] = None) -> VideoClip:
    files = sorted(glob.glob(os.path.join(str(directory), pattern)))
    if len(files) < 2:
        raise TooFewFrames(f"{directory}/{pattern}: {len(files)} frames, need at least 2")
    frames = [_decode(f) for f in files]
    shape = frames[0].shape
    for f, name in zip(frames, files):
        if f.shape != shape:
            raise MixedDimensions(f"{name} is {f.shape}, first frame is {shape}")
    return VideoClip(tuple(frames), label, Path(directory).name, {"files": [os.path.basename(f) for f in files]})


def save_frames(clip: VideoClip, directory, prefix: str = "frame") -> list[str]:
    """Write frames as 16-bit grayscale PNGs; returns the file names."""
    from PIL import Image

    os.makedirs(directory, exist_ok=True)
    names = []
    for t, f in enumerate(clip.frames):
        name = f"{prefix}_{t:04d}.png"
        arr = np.round(np.clip(f, 0, 1) * 65535).astype(np.uint16)
        Image.fromarray(arr).save(os.path.join(str(directory), name))
        names.append(name)
    return names


# -- clip manifests -----------------------------------------------------------


def clip_manifest(clip: VideoClip, frame_files: Sequence[str], strides=(), flows=()) -> dict:
    """JSON-ready manifest for one clip.

    ``flows`` is a list of dicts with at least ``file``, ``estimator``,
    ``stride`` and ``t``; corrected fields also carry ``gamma``.
    """
    return {
        "clip_id": clip.clip_id,
        "label": clip.label,
        "width": clip.width,
        "height": clip.height,
        "frame_count": clip.frame_count,
        "frames": list(frame_files),
        "strides": sorted(int(s) for s in strides),
        "flows": list(flows),
    }


def write_manifest(manifest: dict, path) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True))


def read_manifest(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def clip_from_manifest(manifest: dict, root) -> VideoClip:
    root = Path(root)
    frames = [_decode(str(root / f)) for f in manifest["frames"]]
    if len(frames) < 2:
        raise TooFewFrames(f"clip {manifest.get('clip_id')} lists {len(frames)} frames")
    return VideoClip(tuple(frames), manifest.get("label"), manifest.get("clip_id", ""))
