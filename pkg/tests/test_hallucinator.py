import numpy as np
import pytest

from flowdyn import corpus, estimator, study
from flowdyn import hallucinator as hl
from flowdyn.errors import DimensionMismatch, MissingSelection
from flowdyn.selector import Mode, SelectionRecord


def numeric_grads(model, H, offs, y, lam, eps=1e-4, teacher_forcing=False):
    out = []
    for p in model.params():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            keep = p[idx]
            p[idx] = keep + eps
            lp = hl.loss_and_grads(model, H, offs, y, lam, teacher_forcing)[0]
            p[idx] = keep - eps
            lm = hl.loss_and_grads(model, H, offs, y, lam, teacher_forcing)[0]
            p[idx] = keep
            g[idx] = (lp - lm) / (2 * eps)
        out.append(g)
    return out


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)


def small_problem(seed=0, activation="relu", streams=2):
    rng = np.random.default_rng(seed)
    H = rng.normal(size=(3, 6))
    offs = [rng.normal(size=(3, 4)) for _ in range(streams)]
    y = np.array([0, 2, 1])
    model = hl.init_model(6, [4] * streams, [0, 1, 2], hidden=5, pred_hidden=7, seed=seed, activation=activation)
    model.haf_mean = rng.normal(size=6) * 0.1
    model.haf_scale = rng.uniform(0.5, 2.0, 6)
    return model, H, offs, y


@pytest.mark.parametrize("activation", ["relu", "tanh"])
@pytest.mark.parametrize("teacher_forcing", [False, True])
def test_gradients_match_finite_differences(activation, teacher_forcing):
    model, H, offs, y = small_problem(activation=activation)
    _, grads, _ = hl.loss_and_grads(model, H, offs, y, 0.7, teacher_forcing)
    for a, n in zip(grads, numeric_grads(model, H, offs, y, 0.7, teacher_forcing=teacher_forcing)):
        assert rel_err(a, n) < 1e-4


def test_lambda_zero_is_plain_classification():
    model, H, offs, y = small_problem()
    loss, _, parts = hl.loss_and_grads(model, H, offs, y, 0.0)
    assert loss == pytest.approx(parts["ce"])


@pytest.fixture(scope="module")
def teacher():
    clips = corpus.generate_clips(study.mixed_speed_spec(0, 6))
    H = np.stack([hl.haf(c) for c in clips])
    A = np.random.default_rng(0).normal(size=(H.shape[1], 16)) / np.sqrt(H.shape[1])
    return clips, H, H @ A, [c.label for c in clips]


def test_haf_shape_and_norm(teacher):
    clips, H, _, _ = teacher
    assert H.shape == (24, hl.haf_dim()) == (24, 36)
    np.testing.assert_allclose(np.linalg.norm(H, axis=1), 1.0)


def test_linear_teacher_is_learned(teacher):
    _, H, O, labels = teacher
    # least-squares oracle: the targets are exactly linear in the inputs
    coef = np.linalg.lstsq(H, O, rcond=None)[0]
    assert np.abs(H @ coef - O).max() < 1e-10
    model, hist = hl.fit_arrays(H, [O], labels)
    assert hist[-1]["mse"] < 1e-3
    _, pred = hl.predict_arrays(model, H)
    assert np.linalg.norm(pred - O, axis=1).max() < 0.05


def test_self_supervision_is_active(teacher):
    _, H, O, labels = teacher
    with_mse = hl.fit_arrays(H, [O], labels, lambda_mse=1.0, epochs=60)[1][-1]["mse"]
    without = hl.fit_arrays(H, [O], labels, lambda_mse=0.0, epochs=60)[1][-1]["mse"]
    assert with_mse < without


def test_small_fixed_step_never_increases_loss(teacher):
    _, H, O, labels = teacher
    _, hist = hl.fit_arrays(H, [O], labels, epochs=40, lr=1e-3, batch=len(labels), optimizer="sgd", decay=False)
    losses = np.array([h["loss"] for h in hist])
    assert np.all(np.diff(losses) <= 0)


def test_zero_init_predicts_first_class():
    model = hl.init_model(36, [8], [3, 5, 7], zero_init=True)
    H = np.random.default_rng(0).random((4, 36))
    idx, off = hl.predict_arrays(model, H)
    assert idx.tolist() == [0, 0, 0, 0] and not off.any()
    logits = model.prednet(np.concatenate([model.prepare(H), off], axis=1))
    assert np.all(logits == logits[:, :1])


def test_predict_deterministic_and_round_trip(tmp_path, teacher):
    clips, H, O, labels = teacher
    model, _ = hl.fit_arrays(H, [O], labels, epochs=5)
    a = hl.predict(model, clips[0])
    b = hl.predict(model, clips[0])
    assert a[0] == b[0] and a[1].tobytes() == b[1].tobytes()
    model.save(tmp_path / "hal.bin")
    back = hl.HalModel.load(tmp_path / "hal.bin")
    c = hl.predict(back, clips[0])
    assert c[0] == a[0]
    np.testing.assert_allclose(c[1], a[1], rtol=1e-4, atol=1e-5)


def test_dimension_checks():
    model = hl.init_model(10, [4], [0, 1])
    with pytest.raises(DimensionMismatch):
        hl.HalModel(model.translators, hl.MLP.init([13, 3, 2]), [0, 1])
    with pytest.raises(DimensionMismatch):
        hl.fit_arrays(np.zeros((3, 10)), [np.zeros((2, 4))], [0, 1, 0])
    with pytest.raises(DimensionMismatch):
        hl.fit_arrays(np.zeros((3, 9)), [np.zeros((3, 4))], [0, 1, 0], model=model)


def records(clips, mode=Mode.BEST_TYPE_ONLY, drop_type=None):
    out = []
    for k, c in enumerate(clips):
        ptb = {"hs": (1, 1.0, 0.0), "hs-sharp": (2, 5.0, 0.0)}
        if drop_type and k == 0:
            ptb.pop(drop_type)
        out.append(SelectionRecord(c.clip_id, ("hs", 1 + k % 2, 1.0), 0.0, ptb, mode))
    return out


def fake_off(clip, t, s, g):
    return np.full(4, float(s) + (t == "hs-sharp"))


def test_train_hal_streams(teacher):
    clips = teacher[0][:8]
    model, _ = hl.train_hal(clips, records(clips), epochs=2, off_fn=fake_off)
    assert model.streams == ["best"] and len(model.translators) == 1
    model, _ = hl.train_hal(clips, records(clips, Mode.ALL_TYPES_BEST), epochs=2, off_fn=fake_off)
    assert model.streams == ["hs", "hs-sharp"] and len(model.translators) == 2


def test_missing_selection(teacher):
    clips = teacher[0][:4]
    with pytest.raises(MissingSelection):
        hl.train_hal(clips, records(clips)[1:], epochs=1, off_fn=fake_off)
    with pytest.raises(MissingSelection):
        hl.train_hal(clips, records(clips, Mode.ALL_TYPES_BEST, "hs-sharp"), epochs=1, off_fn=fake_off)


def test_ragged_targets(teacher):
    clips = teacher[0][:4]
    with pytest.raises(DimensionMismatch):
        hl.train_hal(clips, records(clips), epochs=1, off_fn=lambda c, t, s, g: np.zeros(s + 2))


def test_prediction_never_estimates_flow(teacher):
    clips, H, O, labels = teacher
    model, _ = hl.fit_arrays(H, [O], labels, epochs=3)
    estimator.reset_call_count()
    for c in clips:
        hl.predict(model, c)
    hl.accuracy(model, clips)
    assert estimator.call_count() == 0
