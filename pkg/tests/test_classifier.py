import numpy as np
import pytest

from flowdyn import classifier
from flowdyn.classifier import LinearModel
from flowdyn.errors import DimensionMismatch, SingleClass


def blobs(n=40, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal((2, 2), 0.3, (n, 2)), rng.normal((-2, -2), 0.3, (n, 2))])
    y = [0] * n + [1] * n
    return X, y


def test_separable_data():
    X, y = blobs()
    m = classifier.train(X, y, reg=1e-2, epochs=20)
    assert classifier.accuracy(m, X, y) == 1.0


def test_three_classes():
    rng = np.random.default_rng(1)
    centres = np.array([(3, 0), (-3, 0), (0, 3)])
    X = np.vstack([rng.normal(c, 0.3, (20, 2)) for c in centres])
    y = ["a"] * 20 + ["b"] * 20 + ["c"] * 20
    m = classifier.train(X, y, reg=1e-2, epochs=30)
    assert classifier.accuracy(m, X, y) == 1.0
    assert classifier.predict(m, np.array([0.0, 3.0])) == "c"


def test_deterministic():
    X, y = blobs()
    a = classifier.train(X, y, epochs=5, seed=3)
    b = classifier.train(X, y, epochs=5, seed=3)
    assert np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)


def test_objective_never_increases():
    X, y = blobs(seed=2)
    m = classifier.train(X, y, epochs=30)
    h = np.asarray(m.loss_history)
    assert np.all(np.diff(h) <= 1e-12)


def test_single_class():
    with pytest.raises(SingleClass):
        classifier.train(np.zeros((3, 2)), [1, 1, 1])


def test_label_count_mismatch():
    with pytest.raises(DimensionMismatch):
        classifier.train(np.zeros((3, 2)), [0, 1])


def fixed_model():
    return LinearModel(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]), np.zeros(3), [0, 1, 2])


def test_correctness_score():
    m = fixed_model()
    x = np.array([1.0, 0.5])
    assert classifier.correctness_score(m, x, 0) == pytest.approx(0.5)
    assert classifier.correctness_score(m, x, 1) == pytest.approx(-0.5)
    assert classifier.correctness_score(m, np.array([1.0, 1.0]), 0) == 0.0


def test_ties_go_to_lowest_class():
    assert classifier.predict(fixed_model(), np.array([1.0, 1.0])) == 0


def test_score_dimension_check():
    with pytest.raises(DimensionMismatch):
        classifier.score(fixed_model(), np.zeros(3))


def test_save_load(tmp_path):
    X, y = blobs()
    m = classifier.train(X, ["x" if t else "y" for t in y], epochs=3)
    m.save(tmp_path / "m.bin")
    back = LinearModel.load(tmp_path / "m.bin")
    assert back.classes == m.classes
    np.testing.assert_allclose(back.weights, m.weights, rtol=1e-6)
    np.testing.assert_allclose(classifier.score(back, X), classifier.score(m, X), rtol=1e-5, atol=1e-6)
