"""Flow fields as colour images on the standard 55-entry colour wheel."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .flow import FlowField

SEGMENTS = (15, 6, 4, 11, 13, 6)  # RY, YG, GC, CB, BM, MR


def color_wheel() -> np.ndarray:
    """(55, 3) table of RGB values in [0, 255]."""
    ry, yg, gc, cb, bm, mr = SEGMENTS
    wheel = np.zeros((sum(SEGMENTS), 3))
    col = 0
    wheel[col:col + ry, 0] = 255
    wheel[col:col + ry, 1] = np.floor(255 * np.arange(ry) / ry)
    col += ry
    wheel[col:col + yg, 0] = 255 - np.floor(255 * np.arange(yg) / yg)
    wheel[col:col + yg, 1] = 255
    col += yg
    wheel[col:col + gc, 1] = 255
    wheel[col:col + gc, 2] = np.floor(255 * np.arange(gc) / gc)
    col += gc
    wheel[col:col + cb, 1] = 255 - np.floor(255 * np.arange(cb) / cb)
    wheel[col:col + cb, 2] = 255
    col += cb
    wheel[col:col + bm, 2] = 255
    wheel[col:col + bm, 0] = np.floor(255 * np.arange(bm) / bm)
    col += bm
    wheel[col:col + mr, 2] = 255 - np.floor(255 * np.arange(mr) / mr)
    wheel[col:col + mr, 0] = 255
    return wheel


_WHEEL = color_wheel()


def wheel_position(u, v) -> np.ndarray:
    """Fractional wheel index in [0, 55); (1, 0) sits exactly on entry 0."""
    n = len(_WHEEL)
    a = np.arctan2(-np.asarray(v, dtype=np.float64), -np.asarray(u, dtype=np.float64)) / np.pi
    return np.mod((a + 1.0) / 2.0 * n, n)


def colorize(field: FlowField, max_mag: Optional[float] = None) -> np.ndarray:
    """(H, W, 3) uint8 image; white is zero motion, full colour is ``max_mag`` or more."""
    u = field.u.astype(np.float64)
    v = field.v.astype(np.float64)
    mag = np.hypot(u, v)
    if max_mag is None:
        max_mag = float(mag.max())
    elif not max_mag > 0:
        raise ValueError("max_mag must be > 0")
    sat = np.minimum(mag / max_mag, 1.0) if max_mag > 0 else np.zeros_like(mag)
    fk = wheel_position(u, v)
    k0 = np.floor(fk).astype(np.int64) % len(_WHEEL)
    k1 = (k0 + 1) % len(_WHEEL)
    f = (fk - np.floor(fk))[..., None]
    col = ((1 - f) * _WHEEL[k0] + f * _WHEEL[k1]) / 255.0
    col = 1.0 - sat[..., None] * (1.0 - col)
    return np.floor(255.0 * col + 1e-9).astype(np.uint8)


def saturation(img: np.ndarray) -> np.ndarray:
    """Per-pixel distance from white in [0, 1] (max minus min channel over 255)."""
    x = img.astype(np.float64)
    return (x.max(axis=-1) - x.min(axis=-1)) / 255.0


def side_by_side(fields: Sequence[FlowField], labels: Optional[Sequence[str]] = None, max_mag: Optional[float] = None, gap: int = 4) -> np.ndarray:
    """Panels in one row under a shared ``max_mag`` (default: the largest magnitude)."""
    if not fields:
        raise ValueError("no fields to show")
    if labels is not None and len(labels) != len(fields):
        raise ValueError("one label per field required")
    if max_mag is None:
        max_mag = max(float(f.magnitude().max()) for f in fields) or None
    panels = [colorize(f, max_mag) for f in fields]
    h = max(p.shape[0] for p in panels)
    top = 14 if labels else 0
    width = sum(p.shape[1] for p in panels) + gap * (len(panels) - 1)
    canvas = np.full((h + top, width, 3), 255, np.uint8)
    x = 0
    for p in panels:
        canvas[top:top + p.shape[0], x:x + p.shape[1]] = p
        x += p.shape[1] + gap
    if labels:
        im = Image.fromarray(canvas)
        draw = ImageDraw.Draw(im)
        font = ImageFont.load_default()
        x = 0
        for p, text in zip(panels, labels):
            draw.text((x + 2, 1), str(text), fill=(0, 0, 0), font=font)
            x += p.shape[1] + gap
        canvas = np.asarray(im)
    return canvas


def save_png(img: np.ndarray, path) -> None:
    Image.fromarray(np.asarray(img, dtype=np.uint8)).save(path, format="PNG")
