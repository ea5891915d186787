"""One-vs-rest linear SVMs trained by stochastic subgradient descent.

Each binary problem minimizes ``lam/2 |w|^2 + mean(hinge(y (w.x + b)))``
with the step size ``1 / (lam * t)``.  The bias is learned as the weight of
a constant input feature, so it is regularized like the other weights.  The
full objective is evaluated after every epoch and the best iterate so far is
kept, which makes the recorded loss curve non-increasing.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, SingleClass


@dataclass(eq=False)
class LinearModel:
    weights: np.ndarray  # (C, D)
    bias: np.ndarray  # (C,)
    classes: list
    loss_history: list = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[0] != len(self.classes) or len(self.classes) < 2:
            raise DimensionMismatch(f"weights {self.weights.shape} do not match {len(self.classes)} classes")
        if not np.isfinite(self.weights).all():
            raise ValueError("non-finite weights")

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def save(self, path) -> None:
        header = {
            "kind": "linear-ovr",
            "classes": [int(c) if isinstance(c, (int, np.integer)) else c for c in self.classes],
            "dim": self.dim,
            "dtype": "<f4",
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode() + b"\n")
            fh.write(np.asarray(self.weights, "<f4").tobytes())
            fh.write(np.asarray(self.bias, "<f4").tobytes())

    @classmethod
    def load(cls, path) -> "LinearModel":
        raw = Path(path).read_bytes()
        nl = raw.index(b"\n")
        h = json.loads(raw[:nl])
        c, d = len(h["classes"]), h["dim"]
        w = np.frombuffer(raw, "<f4", c * d, nl + 1).reshape(c, d)
        b = np.frombuffer(raw, "<f4", c, nl + 1 + 4 * c * d)
        return cls(w.astype(np.float64), b.astype(np.float64), h["classes"])


def _as_matrix(features) -> np.ndarray:
    rows = [np.asarray(getattr(f, "vector", f), dtype=np.float64) for f in features]
    dims = {r.shape for r in rows}
    if len(dims) != 1 or rows[0].ndim != 1:
        raise DimensionMismatch(f"features have differing shapes {sorted(dims)}")
    return np.stack(rows)


def _objective(w, X1, y, lam):
    return 0.5 * lam * float(w @ w) + float(np.mean(np.maximum(0.0, 1.0 - y * (X1 @ w))))


def _pegasos(X1, y, lam, epochs, rng):
    n, d = X1.shape
    w = np.zeros(d)
    best_w, best = w.copy(), _objective(w, X1, y, lam)
    history = []
    t = 0
    radius = 1.0 / np.sqrt(lam)
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            active = y[i] * (X1[i] @ w) < 1.0
            w *= 1.0 - eta * lam
            if active:
                w += eta * y[i] * X1[i]
            nw = np.linalg.norm(w)
            if nw > radius:
                w *= radius / nw
        obj = _objective(w, X1, y, lam)
        if obj <= best:
            best, best_w = obj, w.copy()
        history.append(best)
    return best_w, history


def train(features, labels: Sequence, reg: float = 1e-3, epochs: int = 50, seed: int = 0) -> LinearModel:
    X = _as_matrix(features)
    labels = list(labels)
    if len(labels) != X.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} features but {len(labels)} labels")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise SingleClass(f"need at least two classes, got {classes}")
    if reg <= 0 or epochs < 1:
        raise ValueError("reg must be > 0 and epochs >= 1")
    X1 = np.hstack([X, np.ones((X.shape[0], 1))])
    lab = np.asarray(labels, dtype=object)
    W = np.zeros((len(classes), X.shape[1]))
    b = np.zeros(len(classes))
    history = np.zeros(epochs)
    for k, c in enumerate(classes):
        y = np.where(lab == c, 1.0, -1.0)
        w, hist = _pegasos(X1, y, reg, epochs, np.random.default_rng([seed, k]))
        W[k], b[k] = w[:-1], w[-1]
        history += np.asarray(hist)
    return LinearModel(W, b, classes, list(history))


def score(model: LinearModel, feature) -> np.ndarray:
    x = np.asarray(getattr(feature, "vector", feature), dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise DimensionMismatch(f"feature of dim {x.shape[-1]} for a model of dim {model.dim}")
    return model.weights @ x + model.bias if x.ndim == 1 else x @ model.weights.T + model.bias


def predict(model: LinearModel, feature):
    # np.argmax returns the first maximum: lowest class index wins ties
    return model.classes[int(np.argmax(score(model, feature)))]


def correctness_score(model: LinearModel, feature, true_label) -> float:
    """Margin of the true class over the best competing class."""
    margins = score(model, feature)
    k = model.classes.index(true_label)
    others = np.delete(margins, k)
    return float(margins[k] - others.max())


def accuracy(model: LinearModel, features, labels) -> float:
    X = _as_matrix(features)
    pred = [model.classes[i] for i in np.argmax(score(model, X), axis=1)]
    return float(np.mean([p == t for p, t in zip(pred, labels)]))
