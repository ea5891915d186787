"""Seeded synthetic videos with analytic ground-truth flow.

Each clip is a periodic band-limited noise background (optionally panning)
with textured square sprites on top: one class actor plus optional random
distractors.  Sprites translate at constant velocity, may spin, and the
actor may carry a period-4 back-and-forth jitter that cancels at strides
that are multiples of 4.  Rendering uses bilinear sampling, so fractional
speeds are exact in expectation.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import ActorExceedsFrame
from .flow import FlowField, Source, VideoClip

_JITTER = np.array([0.0, 1.0, 0.0, -1.0])


@dataclass(frozen=True)
class MotionProfile:
    """Motion model of one class.

    ``direction`` is in degrees in image axes (0 = +x, 90 = +y/down);
    speeds are in pixels per frame; ``pan`` is the background velocity (u, v).
    """

    direction: float = 0.0
    speed: float = 1.0
    actor_size: int = 16
    pan: tuple = (0.0, 0.0)
    spin: float = 0.0
    jitter: float = 0.0
    random_direction: bool = False
    direction_spread: float = 0.0
    distractors: int = 0
    distractor_speed: float = 0.0
    distractor_speed_spread: float = 0.0
    distractor_size: int = 12

    def __post_init__(self):
        if self.speed < 0 or self.distractor_speed < 0 or self.jitter < 0:
            raise ValueError("speeds and jitter must be >= 0")
        if self.actor_size < 2 or self.distractor_size < 2:
            raise ValueError("sprite sizes must be >= 2")
        object.__setattr__(self, "pan", tuple(float(p) for p in self.pan))


@dataclass(frozen=True)
class CorpusSpec:
    classes: tuple
    clips_per_class: int = 6
    frames_per_clip: int = 16
    height: int = 64
    width: int = 64
    noise_sigma: float = 0.0
    seed: int = 0
    texture_sigma: float = 1.5

    def __post_init__(self):
        classes = tuple(c if isinstance(c, MotionProfile) else MotionProfile(**c) for c in self.classes)
        if not classes:
            raise ValueError("corpus needs at least one class")
        if self.clips_per_class < 1 or self.frames_per_clip < 2:
            raise ValueError("clips_per_class >= 1 and frames_per_clip >= 2 required")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        object.__setattr__(self, "classes", classes)

    @property
    def n_clips(self) -> int:
        return len(self.classes) * self.clips_per_class

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classes"] = [asdict(c) for c in self.classes]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusSpec":
        d = dict(d)
        d["classes"] = tuple(MotionProfile(**c) for c in d["classes"])
        return cls(**d)


@dataclass
class _Sprite:
    texture: np.ndarray
    c0: np.ndarray
    velocity: np.ndarray
    spin: float = 0.0
    jitter: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def half(self) -> float:
        return self.texture.shape[0] / 2.0

    def centre(self, t: int) -> np.ndarray:
        return self.c0 + self.velocity * t + self.jitter * _JITTER[t % 4]

    def angle(self, t: int) -> float:
        return self.spin * t

    def local(self, xx, yy, t):
        """Sprite-frame coordinates of image points at time t, and the inside mask."""
        c = self.centre(t)
        th = self.angle(t)
        dx, dy = xx - c[0], yy - c[1]
        cs, sn = math.cos(th), math.sin(th)
        qx = cs * dx + sn * dy
        qy = -sn * dx + cs * dy
        h = self.half
        inside = (qx >= -h) & (qx < h) & (qy >= -h) & (qy < h)
        return qx, qy, inside


def _texture(rng, h, w, sigma, mean, contrast, wrap=True):
    z = ndimage.gaussian_filter(rng.standard_normal((h, w)), sigma, mode="wrap" if wrap else "reflect")
    z = (z - z.mean()) / (z.std() + 1e-12)
    return np.clip(mean + contrast * z, 0.0, 1.0)


def _heading(deg: float) -> np.ndarray:
    r = math.radians(deg)
    return np.array([math.cos(r), math.sin(r)])


def _place(rng, size, offsets, spin, height, width):
    """Random start centre keeping the sprite inside the frame for every offset."""
    r = size / 2.0 * (math.sqrt(2.0) if spin else 1.0)
    lo = r - offsets.min(axis=0)
    hi = np.array([width, height]) - r - offsets.max(axis=0)
    if np.any(hi < lo):
        raise ActorExceedsFrame(
            f"sprite of size {size} with motion span {np.ptp(offsets, axis=0)} does not fit in {width}x{height}"
        )
    return lo + rng.random(2) * (hi - lo)


class Scene:
    """Fully determined parameters of one clip."""

    def __init__(self, spec: CorpusSpec, index: int):
        if not 0 <= index < spec.n_clips:
            raise IndexError(f"clip index {index} outside corpus of {spec.n_clips}")
        self.spec = spec
        self.index = index
        self.label = index // spec.clips_per_class
        prof = spec.classes[self.label]
        self.profile = prof
        rng = np.random.default_rng([spec.seed, self.label, index % spec.clips_per_class])
        h, w, T = spec.height, spec.width, spec.frames_per_clip
        if prof.actor_size > min(h, w) or (prof.distractors and prof.distractor_size > min(h, w)):
            raise ActorExceedsFrame(f"sprite larger than the {w}x{h} frame")
        self.background = _texture(rng, h, w, spec.texture_sigma, 0.5, 0.15)
        self.pan = np.array(prof.pan)
        ts = np.arange(T)[:, None]

        self.sprites: list[_Sprite] = []
        for _ in range(prof.distractors):
            speed = prof.distractor_speed + rng.uniform(-1, 1) * prof.distractor_speed_spread
            vel = _heading(rng.uniform(0, 360)) * max(speed, 0.0)
            tex = _texture(rng, prof.distractor_size, prof.distractor_size, spec.texture_sigma, 0.5, 0.2, False)
            c0 = _place(rng, prof.distractor_size, vel * ts, 0.0, h, w)
            self.sprites.append(_Sprite(tex, c0, vel))

        deg = rng.uniform(0, 360) if prof.random_direction else prof.direction
        if prof.direction_spread:
            deg += rng.uniform(-prof.direction_spread, prof.direction_spread)
        vel = _heading(deg) * prof.speed
        jit = _heading(rng.uniform(0, 360)) * prof.jitter if prof.jitter else np.zeros(2)
        offsets = vel * ts + jit * _JITTER[np.arange(T) % 4][:, None]
        tex = _texture(rng, prof.actor_size, prof.actor_size, spec.texture_sigma, 0.5, 0.2, False)
        c0 = _place(rng, prof.actor_size, offsets, prof.spin, h, w)
        self.actor = _Sprite(tex, c0, vel, prof.spin, jit)
        self.sprites.append(self.actor)
        self.noise_seed = [spec.seed, self.label, index % spec.clips_per_class, 1]

    @property
    def clip_id(self) -> str:
        return f"c{self.label}_{self.index % self.spec.clips_per_class:03d}"

    def render(self, t: int, noise_rng: Optional[np.random.Generator] = None) -> np.ndarray:
        h, w = self.spec.height, self.spec.width
        yy, xx = np.indices((h, w), dtype=np.float64)
        img = kernels.bilinear_sample(self.background, xx - self.pan[0] * t, yy - self.pan[1] * t, True)
        for sp in self.sprites:
            qx, qy, inside = sp.local(xx, yy, t)
            if inside.any():
                # texel centres sit at half-integers of the sprite frame
                vals = kernels.bilinear_sample(sp.texture, qx[inside] + sp.half - 0.5, qy[inside] + sp.half - 0.5, False)
                img[inside] = vals
        if noise_rng is not None and self.spec.noise_sigma > 0:
            img = img + noise_rng.normal(0.0, self.spec.noise_sigma, img.shape)
        return np.clip(img, 0.0, 1.0)

    def flow(self, t: int, stride: int = 1) -> FlowField:
        h, w = self.spec.height, self.spec.width
        yy, xx = np.indices((h, w), dtype=np.float64)
        u = np.full((h, w), self.pan[0] * stride)
        v = np.full((h, w), self.pan[1] * stride)
        for sp in self.sprites:
            _, _, inside = sp.local(xx, yy, t)
            c0, c1 = sp.centre(t), sp.centre(t + stride)
            dth = sp.angle(t + stride) - sp.angle(t)
            cs, sn = math.cos(dth), math.sin(dth)
            dx, dy = xx[inside] - c0[0], yy[inside] - c0[1]
            u[inside] = c1[0] + cs * dx - sn * dy - xx[inside]
            v[inside] = c1[1] + sn * dx + cs * dy - yy[inside]
        return FlowField(u, v, stride, Source.INGESTED)

    def clip(self) -> VideoClip:
        rng = np.random.default_rng(self.noise_seed)
        frames = tuple(self.render(t, rng) for t in range(self.spec.frames_per_clip))
        return VideoClip(frames, self.label, self.clip_id, {"index": self.index})


def generate(spec: CorpusSpec) -> list[tuple[VideoClip, list[FlowField]]]:
    """All clips, class-major, each with its stride-1 ground-truth flows."""
    out = []
    for i in range(spec.n_clips):
        sc = Scene(spec, i)
        gt = [sc.flow(t, 1) for t in range(spec.frames_per_clip - 1)]
        out.append((sc.clip(), gt))
    return out


def generate_clips(spec: CorpusSpec) -> list[VideoClip]:
    return [Scene(spec, i).clip() for i in range(spec.n_clips)]


def ground_truth_flow(spec: CorpusSpec, clip_index: int, t: int, stride: int = 1) -> FlowField:
    if t < 0 or t + stride >= spec.frames_per_clip:
        raise IndexError(f"pair ({t}, {t + stride}) outside a {spec.frames_per_clip}-frame clip")
    return Scene(spec, clip_index).flow(t, stride)
