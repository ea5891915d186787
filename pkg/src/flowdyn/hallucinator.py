"""Hallucinating flow features from appearance.

A translator MLP maps an appearance descriptor (HAF: oriented-gradient
histograms of the frames, averaged over time) to the optical-flow feature
picked by the selector, and a small prediction MLP classifies the
concatenation of HAF and the hallucinated OFF.  The loss is

    lambda_mse * sum_k MSE(T_k(haf), off_k) + CE(P(haf ++ T_1(haf) ++ ...), y)

where MSE is the squared L2 error per sample averaged over the batch.

Training feeds the translator output to the prediction net, as at test time,
so :func:`predict` never needs optical flow.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, MissingSelection
from .features import DEFAULT_BINS, Descriptor, cell_index, l2_normalize
from .selector import Mode

HAF_BINS = 9
HAF_GRID = (2, 2)


# -- appearance descriptor ---------------------------------------------------


def haf_frame(frame: np.ndarray, bins: int = HAF_BINS, grid=HAF_GRID) -> np.ndarray:
    """Unsigned gradient-orientation histogram per cell, magnitude weighted."""
    img = np.asarray(frame, dtype=np.float64)
    if img.ndim == 3:
        img = img.mean(axis=2)
    gx = ndimage.sobel(img, axis=1, mode="nearest")
    gy = ndimage.sobel(img, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), np.pi)
    b = np.minimum((ang / (np.pi / bins)).astype(np.int64), bins - 1)
    cells = cell_index(img.shape[0], img.shape[1], grid)
    ncells = grid[0] * grid[1]
    hist = np.bincount((cells * bins + b).ravel(), weights=mag.ravel(), minlength=ncells * bins)
    return hist


def haf(clip, bins: int = HAF_BINS, grid=HAF_GRID) -> np.ndarray:
    frames = clip.frames if hasattr(clip, "frames") else clip
    return l2_normalize(np.mean([haf_frame(f, bins, grid) for f in frames], axis=0))


def haf_dim(bins: int = HAF_BINS, grid=HAF_GRID) -> int:
    return grid[0] * grid[1] * bins


# -- networks ----------------------------------------------------------------


@dataclass(eq=False)
class MLP:
    """Fully connected net; hidden layers use ``activation``, the output is linear."""

    dims: list
    weights: list
    biases: list
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.dims) - 1 or len(self.biases) != len(self.weights):
            raise DimensionMismatch("layer count does not match dims")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.dims[k], self.dims[k + 1]) or b.shape != (self.dims[k + 1],):
                raise DimensionMismatch(f"layer {k}: {w.shape}/{b.shape} does not chain {self.dims}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError("non-finite parameters")

    @classmethod
    def init(cls, dims, rng=None, activation="relu", zero=False) -> "MLP":
        rng = rng if rng is not None else np.random.default_rng(0)
        ws, bs = [], []
        for a, b in zip(dims[:-1], dims[1:]):
            if zero:
                ws.append(np.zeros((a, b)))
            else:
                ws.append(rng.normal(0.0, np.sqrt(2.0 / a), (a, b)))
            bs.append(np.zeros(b))
        return cls(list(dims), ws, bs, activation)

    def params(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def _act(self, z):
        return np.maximum(z, 0.0) if self.activation == "relu" else np.tanh(z)

    def _dact(self, z, a):
        return (z > 0).astype(z.dtype) if self.activation == "relu" else 1.0 - a * a

    def forward(self, x):
        cache = []
        a = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            cache.append((a, z))
            a = z if k == last else self._act(z)
        return a, cache

    def backward(self, cache, dout):
        """Gradients of the parameters (same order as :meth:`params`) and of the input."""
        grads = [None] * (2 * len(self.weights))
        g = dout
        for k in range(len(self.weights) - 1, -1, -1):
            a_in, z = cache[k]
            if k != len(self.weights) - 1:
                g = g * self._dact(z, self._act(z))
            grads[2 * k] = a_in.T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            g = g @ self.weights[k].T
        return grads, g

    def __call__(self, x):
        return self.forward(x)[0]


# -- model -------------------------------------------------------------------


@dataclass(eq=False)
class HalModel:
    translators: list  # one MLP per hallucinated stream
    prednet: MLP
    classes: list
    streams: list = field(default_factory=list)  # flow type hallucinated by each translator
    haf_config: dict = field(default_factory=lambda: {"bins": HAF_BINS, "grid": list(HAF_GRID)})
    off_config: dict = field(default_factory=dict)
    # fixed input standardization, estimated on the training HAFs
    haf_mean: Optional[np.ndarray] = None
    haf_scale: Optional[np.ndarray] = None

    def __post_init__(self):
        hd = self.prednet.dims[0]
        in_dim = self.translators[0].dims[0] if self.translators else hd
        total = in_dim + sum(t.dims[-1] for t in self.translators)
        if any(t.dims[0] != in_dim for t in self.translators) or total != hd:
            raise DimensionMismatch(f"prednet input {hd} != HAF {in_dim} + OFF dims")
        if self.prednet.dims[-1] != len(self.classes):
            raise DimensionMismatch("prednet output does not match the class count")
        d = self.haf_dim
        self.haf_mean = np.zeros(d) if self.haf_mean is None else np.asarray(self.haf_mean, dtype=np.float64)
        self.haf_scale = np.ones(d) if self.haf_scale is None else np.asarray(self.haf_scale, dtype=np.float64)
        if self.haf_mean.shape != (d,) or self.haf_scale.shape != (d,):
            raise DimensionMismatch(f"standardization vectors do not match HAF dim {d}")

    def prepare(self, H: np.ndarray) -> np.ndarray:
        return (np.asarray(H, dtype=np.float64) - self.haf_mean) / self.haf_scale

    @property
    def haf_dim(self) -> int:
        return self.prednet.dims[0] - sum(t.dims[-1] for t in self.translators)

    def params(self) -> list:
        out = []
        for t in self.translators:
            out += t.params()
        return out + self.prednet.params()

    def save(self, path) -> None:
        def topo(m):
            return {"dims": m.dims, "activation": m.activation}

        header = {
            "kind": "hallucinator",
            "classes": [int(c) if isinstance(c, (int, np.integer)) else c for c in self.classes],
            "translators": [topo(t) for t in self.translators],
            "prednet": topo(self.prednet),
            "streams": list(self.streams),
            "haf": self.haf_config,
            "off": self.off_config,
            "dtype": "<f4",
        }
        blob = b"".join(np.asarray(p, "<f4").tobytes() for p in self.params() + [self.haf_mean, self.haf_scale])
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode() + b"\n")
            fh.write(blob)

    @classmethod
    def load(cls, path) -> "HalModel":
        raw = Path(path).read_bytes()
        nl = raw.index(b"\n")
        h = json.loads(raw[:nl])
        off = nl + 1

        def build(t):
            nonlocal off
            ws, bs = [], []
            for a, b in zip(t["dims"][:-1], t["dims"][1:]):
                ws.append(np.frombuffer(raw, "<f4", a * b, off).reshape(a, b).astype(np.float64))
                off += 4 * a * b
                bs.append(np.frombuffer(raw, "<f4", b, off).astype(np.float64))
                off += 4 * b
            return MLP(list(t["dims"]), ws, bs, t["activation"])

        trans = [build(t) for t in h["translators"]]
        pred = build(h["prednet"])
        d = pred.dims[0] - sum(t.dims[-1] for t in trans)
        mean = np.frombuffer(raw, "<f4", d, off).astype(np.float64)
        scale = np.frombuffer(raw, "<f4", d, off + 4 * d).astype(np.float64)
        return cls(trans, pred, h["classes"], h["streams"], h["haf"], h["off"], mean, scale)


# -- loss and gradients ------------------------------------------------------


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grads(model: HalModel, H, offs, y, lambda_mse: float = 1.0, teacher_forcing: bool = False):
    """Total loss on a batch and its gradient for every parameter tensor.

    ``H`` is (N, haf_dim) raw HAFs, ``offs`` a list of (N, off_dim) targets (one per
    translator), ``y`` class indices.  With ``teacher_forcing`` the
    prediction net reads the target OFFs instead of the translator outputs.
    """
    H = model.prepare(H)
    n = H.shape[0]
    outs, caches = [], []
    mse_total = 0.0
    for t, target in zip(model.translators, offs):
        o, c = t.forward(H)
        outs.append(o)
        caches.append(c)
        mse_total += float(np.sum((o - target) ** 2)) / n
    branch = offs if teacher_forcing else outs
    x = np.concatenate([H] + list(branch), axis=1)
    logits, pcache = model.prednet.forward(x)
    p = _softmax(logits)
    ce = float(-np.mean(np.log(p[np.arange(n), y] + 1e-300)))
    loss = lambda_mse * mse_total + ce

    dlogits = p.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    pgrads, dx = model.prednet.backward(pcache, dlogits)
    grads = []
    col = H.shape[1]
    for t, o, target, c in zip(model.translators, outs, offs, caches):
        d = o.shape[1]
        dout = lambda_mse * 2.0 * (o - target) / n
        if not teacher_forcing:
            dout = dout + dx[:, col:col + d]
        col += d
        tg, _ = t.backward(c, dout)
        grads += tg
    return loss, grads + pgrads, {"mse": mse_total, "ce": ce}


def init_model(haf_dim_: int, off_dims: Sequence[int], classes, *, hidden=128, pred_hidden=64, seed=0, zero_init=False, activation="relu") -> HalModel:
    rng = np.random.default_rng(seed)
    trans = [MLP.init([haf_dim_, hidden, d], rng, activation, zero_init) for d in off_dims]
    pred = MLP.init([haf_dim_ + sum(off_dims), pred_hidden, len(classes)], rng, activation, zero_init)
    return HalModel(trans, pred, list(classes), [""] * len(off_dims))


def fit_arrays(
    H: np.ndarray,
    offs: Sequence[np.ndarray],
    labels: Sequence,
    *,
    classes=None,
    lambda_mse: float = 1.0,
    epochs: int = 200,
    lr: float = 1e-2,
    batch: int = 8,
    seed: int = 0,
    hidden: int = 128,
    pred_hidden: int = 64,
    teacher_forcing: bool = False,
    optimizer: str = "adam",
    decay: bool = True,
    model: Optional[HalModel] = None,
):
    """Seeded mini-batch training on arrays; returns (model, per-epoch history).

    A fresh model standardizes its inputs with the mean and spread of ``H``.
    ``optimizer`` is ``"adam"`` (bias-corrected moment estimates) or plain
    ``"sgd"``; with ``decay`` the step falls linearly from ``lr`` to zero.
    """
    H = np.asarray(H, dtype=np.float64)
    offs = [np.asarray(o, dtype=np.float64) for o in offs]
    if any(o.shape[0] != H.shape[0] for o in offs) or len(labels) != H.shape[0]:
        raise DimensionMismatch("HAF, OFF targets and labels disagree on the sample count")
    classes = list(classes) if classes is not None else sorted(set(labels))
    y = np.array([classes.index(c) for c in labels])
    if model is None:
        model = init_model(H.shape[1], [o.shape[1] for o in offs], classes, hidden=hidden, pred_hidden=pred_hidden, seed=seed)
        sd = H.std(axis=0)
        model.haf_mean = H.mean(axis=0)
        model.haf_scale = np.where(sd > 1e-8, sd, 1.0)
    elif model.haf_dim != H.shape[1]:
        raise DimensionMismatch(f"model expects HAF dim {model.haf_dim}, got {H.shape[1]}")
    if optimizer not in ("adam", "sgd"):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    rng = np.random.default_rng([seed, 1])
    params = model.params()
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    b1, b2, eps = 0.9, 0.999, 1e-8
    history = []
    n = H.shape[0]
    step = 0
    for epoch in range(epochs):
        # linear decay of the step size to zero over the run
        rate = lr * (1.0 - epoch / epochs) if decay else lr
        perm = rng.permutation(n)
        for s in range(0, n, batch):
            idx = perm[s:s + batch]
            _, grads, _ = loss_and_grads(model, H[idx], [o[idx] for o in offs], y[idx], lambda_mse, teacher_forcing)
            step += 1
            for p, g, a, b in zip(params, grads, m1, m2):
                if optimizer == "sgd":
                    p -= rate * g
                    continue
                a *= b1
                a += (1 - b1) * g
                b *= b2
                b += (1 - b2) * g * g
                p -= rate * (a / (1 - b1**step)) / (np.sqrt(b / (1 - b2**step)) + eps)
        loss, _, parts = loss_and_grads(model, H, offs, y, lambda_mse, teacher_forcing)
        history.append({"loss": loss, **parts})
    return model, history


# -- corpus-level API --------------------------------------------------------


def _targets(records):
    """Per stream: its name and each record's (type, stride, gamma) target.

    Best-type-only records share one stream whose flow type may differ per
    clip; otherwise there is one stream per flow type.
    """
    if all(Mode(r.mode) is Mode.BEST_TYPE_ONLY for r in records):
        return [("best", [r.best for r in records])]
    types = []
    for r in records:
        for t in r.per_type_best:
            if t not in types:
                types.append(t)
    out = []
    for t in types:
        pts = []
        for r in records:
            if t not in r.per_type_best:
                raise MissingSelection(f"clip {r.clip_id!r} has no selection for flow type {t!r}")
            s, g, _ = r.per_type_best[t]
            pts.append((t, s, g))
        out.append((t, pts))
    return out


def train_hal(
    clips,
    selections,
    *,
    lambda_mse: float = 1.0,
    epochs: int = 200,
    seed: int = 0,
    lr: float = 1e-2,
    batch: int = 8,
    descriptor=Descriptor.COMBINED,
    off_bins: int = DEFAULT_BINS,
    off_grid=(4, 4),
    store=None,
    teacher_forcing: bool = False,
    off_fn=None,
    haf_bins: int = HAF_BINS,
    haf_grid=HAF_GRID,
):
    """Fit a model on clips whose target OFFs follow their selection records.

    Records in best-type-only mode give one translator fed each clip's
    global winner; records holding a winner per flow type give one
    translator per type.  ``off_fn(clip,
    flow_type, stride, gamma)`` overrides how target OFFs are computed.
    Returns (model, history).
    """
    by_id = {r.clip_id: r for r in selections}
    recs = []
    for c in clips:
        if c.clip_id not in by_id:
            raise MissingSelection(f"no selection record for clip {c.clip_id!r}")
        recs.append(by_id[c.clip_id])
    streams = _targets(recs)

    if off_fn is None:
        from .correction import CorrectionParams
        from .features import FlowStore, featurize_stream

        store = store or FlowStore()

        def off_fn(clip, t, s, g):
            return featurize_stream(clip, t, s, CorrectionParams(g), descriptor, store=store, bins=off_bins, grid=off_grid).vector

    offs = []
    for name, pts in streams:
        rows = [np.asarray(off_fn(c, *p), dtype=np.float64) for c, p in zip(clips, pts)]
        if len({x.shape for x in rows}) != 1:
            raise DimensionMismatch(f"target OFFs of stream {name!r} differ in shape")
        offs.append(np.stack(rows))
    H = np.stack([haf(c, haf_bins, tuple(haf_grid)) for c in clips])
    labels = [c.label for c in clips]
    model, history = fit_arrays(H, offs, labels, lambda_mse=lambda_mse, epochs=epochs, lr=lr, batch=batch, seed=seed, teacher_forcing=teacher_forcing)
    model.streams = [name for name, _ in streams]
    model.haf_config = {"bins": haf_bins, "grid": list(haf_grid)}
    model.off_config = {"descriptor": Descriptor(descriptor).value, "bins": off_bins, "grid": list(off_grid)}
    return model, history


def predict_arrays(model: HalModel, H: np.ndarray):
    """Class indices and hallucinated OFFs (concatenated across translators)."""
    H = model.prepare(np.atleast_2d(H))
    outs = [t(H) for t in model.translators]
    logits = model.prednet(np.concatenate([H] + outs, axis=1))
    return np.argmax(logits, axis=1), np.concatenate(outs, axis=1)


def predict(model: HalModel, clip):
    """(label, hallucinated OFF) from appearance alone."""
    cfg = model.haf_config
    h = haf(clip, cfg.get("bins", HAF_BINS), tuple(cfg.get("grid", HAF_GRID)))
    k, off = predict_arrays(model, h)
    return model.classes[int(k[0])], off[0]


def accuracy(model: HalModel, clips) -> float:
    return float(np.mean([predict(model, c)[0] == c.label for c in clips]))
