import itertools
import math

import numpy as np
import pytest

from flowdyn import classifier, selector
from flowdyn.errors import InsufficientData
from flowdyn.selector import Mode, SelectionGrid


def synthetic_bank(n_per_class=5, seed=0):
    """Features whose separability depends on the grid point."""
    rng = np.random.default_rng(seed)
    labels = [0] * n_per_class + [1] * n_per_class
    cache = {}

    def featurize(i, t, s, g):
        key = (i, t, s, g)
        if key not in cache:
            r = np.random.default_rng([seed, i, hash(t) % 1000, s, int(g * 100)])
            signal = (s == 4) * (g == 5.0) * 2.0 + 0.2 * s * (t == "b")
            cache[key] = r.normal(0, 1, 3) + np.array([signal * (1 if labels[i] else -1), 0, 0])
        return cache[key]

    return labels, featurize, rng


def brute_force(clip_ids, labels, grid, featurize, seed, reg, epochs):
    """Per clip: score every point from the half it is not in, keep the preferred best."""
    first, second = selector.stratified_halves(labels, seed)
    other = {i: second for i in first}
    other.update({i: first for i in second})
    order = list(grid.flow_types)
    ranked_points = sorted(
        itertools.product(grid.flow_types, grid.strides, grid.gammas),
        key=lambda p: (p[1], abs(math.log(p[2])), p[2], order.index(p[0])),
    )
    out = {}
    for i, cid in enumerate(clip_ids):
        best, best_score = None, -np.inf
        for p in ranked_points:
            train = other[i]
            m = classifier.train([featurize(j, *p) for j in train], [labels[j] for j in train], reg, epochs, seed)
            sc = classifier.correctness_score(m, featurize(i, *p), labels[i])
            if sc > best_score:
                best, best_score = p, sc
        out[cid] = (best, best_score)
    return out


def test_matches_brute_force():
    labels, featurize, _ = synthetic_bank()
    ids = [f"v{i}" for i in range(len(labels))]
    grid = SelectionGrid(("a", "b"), (1, 4), (1.0, 5.0))
    scores = selector.cross_score(ids, labels, grid, featurize, seed=2, epochs=10)
    recs = selector.select_per_video(scores, Mode.BEST_TYPE_ONLY, ["a", "b"])
    oracle = brute_force(ids, labels, grid, featurize, 2, selector.SCORING_REG, 10)
    for r in recs:
        assert r.best == oracle[r.clip_id][0]
        assert r.score == pytest.approx(oracle[r.clip_id][1], abs=1e-12)


def test_ties_prefer_stride_one_and_gamma_near_one():
    table = {("a", s, g): 0.5 for s in (1, 2, 4) for g in (0.1, 1.0, 5.0)}
    rec, = selector.select_per_video({"v": table}, type_order=["a"])
    assert rec.best == ("a", 1, 1.0)
    table = {("a", 2, 0.5): 1.0, ("a", 2, 2.0): 1.0}
    rec, = selector.select_per_video({"v": table}, type_order=["a"])
    assert rec.best == ("a", 2, 0.5)


def test_single_point_grid():
    labels, featurize, _ = synthetic_bank(3)
    ids = [str(i) for i in range(6)]
    grid = SelectionGrid(("a",), (1,), (1.0,))
    recs = selector.select_per_video(selector.cross_score(ids, labels, grid, featurize), type_order=["a"])
    assert all(r.best == ("a", 1, 1.0) for r in recs)


def test_dominated_point_leaves_choice_alone():
    table = {("a", 1, 1.0): 0.2, ("a", 4, 5.0): 0.9}
    before = selector.select_per_video({"v": dict(table)}, type_order=["a"])[0].best
    table[("a", 2, 0.1)] = -3.0
    after = selector.select_per_video({"v": table}, type_order=["a"])[0].best
    assert before == after == ("a", 4, 5.0)


def test_all_types_mode_keeps_each_type():
    table = {("a", 1, 1.0): 0.1, ("a", 4, 5.0): 0.3, ("b", 2, 1.0): 0.2}
    rec, = selector.select_per_video({"v": table}, Mode.ALL_TYPES_BEST, ["a", "b"])
    assert rec.per_type_best == {"a": (4, 5.0, 0.3), "b": (2, 1.0, 0.2)}
    rec, = selector.select_per_video({"v": table}, Mode.BEST_TYPE_ONLY, ["a", "b"])
    assert list(rec.per_type_best) == ["a"]


def test_halves_partition():
    labels = [0] * 5 + [1] * 4 + [2] * 2
    a, b = selector.stratified_halves(labels, seed=1)
    assert sorted(a + b) == list(range(len(labels))) and not set(a) & set(b)
    for c in set(labels):
        assert any(labels[i] == c for i in a) and any(labels[i] == c for i in b)
    assert sum(labels[i] == 0 for i in a) == 3


def test_insufficient_data():
    with pytest.raises(InsufficientData):
        selector.stratified_halves([0, 0, 1])
    with pytest.raises(InsufficientData):
        selector.stratified_halves([0, 0, 0])
    with pytest.raises(InsufficientData):
        SelectionGrid(("a",), (8, 16)).truncated(8)


def test_modal_choice():
    recs = selector.select_per_video(
        {
            "x": {("a", 4, 5.0): 1.0, ("a", 1, 1.0): 0.0},
            "y": {("a", 4, 5.0): 1.0, ("a", 1, 1.0): 0.0},
            "z": {("a", 4, 5.0): 0.0, ("a", 1, 1.0): 1.0},
        },
        Mode.ALL_TYPES_BEST,
        ["a"],
    )
    assert selector.modal_choice(recs) == ("a", 4, 5.0)
    assert selector.modal_choice(recs, "a") == ("a", 4, 5.0)
    with pytest.raises(InsufficientData):
        selector.modal_choice(recs, "b")


def test_selections_round_trip(tmp_path):
    table = {("a", 1, 1.0): 0.1, ("b", 4, 5.0): 0.3}
    recs = selector.select_per_video({"v": table}, Mode.ALL_TYPES_BEST, ["a", "b"])
    selector.save_selections(recs, tmp_path / "s.json", SelectionGrid(("a", "b"), (1, 4), (1.0, 5.0)))
    back = selector.load_selections(tmp_path / "s.json")
    assert back[0].best == recs[0].best and back[0].per_type_best == recs[0].per_type_best
