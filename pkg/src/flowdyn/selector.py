"""Stride-and-gamma selection by two-fold cross-scoring.

The training clips are split into two class-stratified halves.  For every
grid point (flow type, stride, gamma) a linear model is trained on one half
and used to score the clips of the other half, then the roles swap, so each
clip receives exactly one held-out correctness score per grid point.  The
per-video winners are the grid points with the highest score.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import classifier
from .errors import InsufficientData

log = logging.getLogger(__name__)

DEFAULT_GAMMAS = (0.1, 0.5, 1.0, 2.0, 5.0)
# Scoring models are strongly regularized: near-unregularized SVMs fitted on
# uninformative grid points give large held-out margins of random sign,
# which would swamp the per-clip argmax.
SCORING_REG = 1.0

GridPoint = tuple  # (flow_type, stride, gamma)


class Mode(str, Enum):
    ALL_TYPES_BEST = "all_types_best"
    BEST_TYPE_ONLY = "best_type_only"


@dataclass(frozen=True)
class SelectionGrid:
    flow_types: tuple
    strides: tuple
    gammas: tuple = DEFAULT_GAMMAS

    def __post_init__(self):
        ft = tuple(self.flow_types)
        st = tuple(int(s) for s in self.strides)
        gm = tuple(float(g) for g in self.gammas)
        if not ft or not st or not gm:
            raise ValueError("grid axes must be non-empty")
        if any(g <= 0 for g in gm):
            raise ValueError("gammas must be > 0")
        if any(s < 1 for s in st):
            raise ValueError("strides must be >= 1")
        object.__setattr__(self, "flow_types", ft)
        object.__setattr__(self, "strides", st)
        object.__setattr__(self, "gammas", gm)

    def points(self) -> list[GridPoint]:
        return [(t, s, g) for t in self.flow_types for s in self.strides for g in self.gammas]

    def __len__(self):
        return len(self.flow_types) * len(self.strides) * len(self.gammas)

    def truncated(self, frame_count: int) -> "SelectionGrid":
        """Drop strides that do not fit in a ``frame_count``-frame clip."""
        keep = tuple(s for s in self.strides if s < frame_count)
        if not keep:
            raise InsufficientData(f"no stride of {self.strides} fits a {frame_count}-frame clip")
        return SelectionGrid(self.flow_types, keep, self.gammas)

    def to_dict(self) -> dict:
        return {"flow_types": list(self.flow_types), "strides": list(self.strides), "gammas": list(self.gammas)}

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionGrid":
        return cls(tuple(d["flow_types"]), tuple(d["strides"]), tuple(d.get("gammas", DEFAULT_GAMMAS)))


@dataclass
class SelectionRecord:
    clip_id: str
    best: GridPoint
    score: float
    per_type_best: dict = field(default_factory=dict)  # type -> (stride, gamma, score)
    mode: Mode = Mode.BEST_TYPE_ONLY

    def to_dict(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "best": {"flow_type": self.best[0], "stride": self.best[1], "gamma": self.best[2]},
            "score": self.score,
            "per_type_best": {
                t: {"stride": s, "gamma": g, "score": sc} for t, (s, g, sc) in self.per_type_best.items()
            },
            "mode": Mode(self.mode).value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionRecord":
        b = d["best"]
        ptb = {t: (int(x["stride"]), float(x["gamma"]), float(x["score"])) for t, x in d["per_type_best"].items()}
        return cls(d["clip_id"], (b["flow_type"], int(b["stride"]), float(b["gamma"])), float(d["score"]), ptb, Mode(d["mode"]))


def stratified_halves(labels: Sequence, seed: int = 0) -> tuple[list[int], list[int]]:
    """Split indices into two halves holding every class.

    Each class is shuffled with the seed and its first ``ceil(n/2)`` members
    go to the first half.  A class with fewer than two clips cannot appear
    on both sides and raises :class:`InsufficientData`.
    """
    labels = list(labels)
    rng = np.random.default_rng(seed)
    first, second = [], []
    for c in sorted(set(labels)):
        idx = [i for i, y in enumerate(labels) if y == c]
        if len(idx) < 2:
            raise InsufficientData(f"class {c!r} has {len(idx)} clip(s); two halves need at least 2")
        idx = [idx[j] for j in rng.permutation(len(idx))]
        k = (len(idx) + 1) // 2
        first += idx[:k]
        second += idx[k:]
    if len(set(labels)) < 2:
        raise InsufficientData("scoring needs at least two classes")
    return sorted(first), sorted(second)


def cross_score(
    clip_ids: Sequence[str],
    labels: Sequence,
    grid: SelectionGrid,
    featurize: Callable[[int, str, int, float], np.ndarray],
    *,
    seed: int = 0,
    reg: float = SCORING_REG,
    epochs: int = 50,
    jobs: int = 1,
) -> dict:
    """Held-out correctness score of every clip at every grid point.

    ``featurize(i, flow_type, stride, gamma)`` returns the feature vector of
    clip ``i``.  Result: ``{clip_id: {(type, stride, gamma): score}}``.
    """
    halves = stratified_halves(labels, seed)
    scores = {cid: {} for cid in clip_ids}

    def job(point):
        t, s, g = point
        X = [featurize(i, t, s, g) for i in range(len(clip_ids))]
        out = []
        for train_idx, test_idx in (halves, halves[::-1]):
            model = classifier.train([X[i] for i in train_idx], [labels[i] for i in train_idx], reg, epochs, seed)
            out += [(i, classifier.correctness_score(model, X[i], labels[i])) for i in test_idx]
        return point, out

    points = grid.points()
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(job, points))
    else:
        results = [job(p) for p in points]
    for point, out in results:
        for i, sc in out:
            scores[clip_ids[i]][point] = sc
    return scores


def preference_key(point: GridPoint, score: float, type_order: Sequence[str]):
    """Sort key: higher score, then smaller stride, gamma nearer 1, type order."""
    t, s, g = point
    return (-score, s, abs(math.log(g)), g, list(type_order).index(t))


def select_per_video(scores: dict, mode=Mode.BEST_TYPE_ONLY, type_order: Optional[Sequence[str]] = None) -> list[SelectionRecord]:
    mode = Mode(mode)
    records = []
    for cid, table in scores.items():
        order = list(type_order) if type_order else sorted({p[0] for p in table})
        ranked = sorted(table.items(), key=lambda kv: preference_key(kv[0], kv[1], order))
        per_type = {}
        for (t, s, g), sc in ranked:
            per_type.setdefault(t, (s, g, sc))
        best, best_score = ranked[0]
        if mode is Mode.BEST_TYPE_ONLY:
            per_type = {best[0]: per_type[best[0]]}
        records.append(SelectionRecord(cid, best, best_score, per_type, mode))
    return records


def modal_choice(records: Sequence[SelectionRecord], flow_type: Optional[str] = None, type_order=None):
    """Most frequent winner across clips (ties follow the preference order).

    With ``flow_type`` given, the most frequent (stride, gamma) for that type
    is returned as a full grid point.
    """
    counts: dict = {}
    for r in records:
        if flow_type is None:
            p = r.best
        elif flow_type in r.per_type_best:
            s, g, _ = r.per_type_best[flow_type]
            p = (flow_type, s, g)
        else:
            continue
        counts[p] = counts.get(p, 0) + 1
    if not counts:
        raise InsufficientData("no selections to aggregate")
    order = list(type_order) if type_order else sorted({p[0] for p in counts})
    return min(counts, key=lambda p: preference_key(p, counts[p], order))


def save_selections(records: Sequence[SelectionRecord], path, grid: Optional[SelectionGrid] = None) -> None:
    doc = {"records": [r.to_dict() for r in records]}
    if grid is not None:
        doc["grid"] = grid.to_dict()
    Path(path).write_text(json.dumps(doc, indent=2))


def load_selections(path) -> list[SelectionRecord]:
    doc = json.loads(Path(path).read_text())
    return [SelectionRecord.from_dict(d) for d in doc["records"]]
