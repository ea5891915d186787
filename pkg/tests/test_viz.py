import numpy as np
import pytest

from flowdyn import viz
from flowdyn.correction import CorrectionParams, correct
from flowdyn.flow import FlowField


def reference_wheel():
    """Entry-by-entry construction of the 55-colour table."""
    rows = []
    for i in range(15):
        rows.append((255, int(255 * i / 15), 0))
    for i in range(6):
        rows.append((255 - int(255 * i / 6), 255, 0))
    for i in range(4):
        rows.append((0, 255, int(255 * i / 4)))
    for i in range(11):
        rows.append((0, 255 - int(255 * i / 11), 255))
    for i in range(13):
        rows.append((int(255 * i / 13), 0, 255))
    for i in range(6):
        rows.append((255, 0, 255 - int(255 * i / 6)))
    return np.array(rows, dtype=float)


def test_wheel_table():
    np.testing.assert_array_equal(viz.color_wheel(), reference_wheel())


def test_zero_field_is_white():
    img = viz.colorize(FlowField.zeros(5, 7))
    assert img.shape == (5, 7, 3) and img.dtype == np.uint8 and (img == 255).all()


def test_uniform_rightward_flow():
    img = viz.colorize(FlowField(np.ones((4, 4)), np.zeros((4, 4))))
    assert (img == reference_wheel()[0].astype(np.uint8)).all()


@pytest.mark.parametrize("k", [0, 7, 20, 41])
def test_wheel_entries(k):
    # the direction landing exactly on entry k
    a = 2 * np.pi * k / 55 - np.pi
    u, v = -np.cos(a), -np.sin(a)
    img = viz.colorize(FlowField(np.full((1, 1), u), np.full((1, 1), v)))
    assert np.abs(img[0, 0].astype(int) - reference_wheel()[k]).max() <= 1


def test_clamp_above_max_mag():
    f = FlowField(np.array([[1.0, 5.0]]), np.zeros((1, 2)))
    img = viz.colorize(f, max_mag=1.0)
    assert (img[0, 0] == img[0, 1]).all()
    with pytest.raises(ValueError):
        viz.colorize(f, max_mag=0.0)


def mixed(rng=None):
    rng = rng or np.random.default_rng(0)
    m = rng.uniform(0.1, 2.0, (16, 16))
    a = rng.uniform(-np.pi, np.pi, (16, 16))
    return m, a


def test_full_turn_changes_nothing():
    m, a = mixed()
    f0 = FlowField(m * np.sin(a), m * np.cos(a))
    f1 = FlowField(m * np.sin(a + 2 * np.pi), m * np.cos(a + 2 * np.pi))
    diff = np.abs(viz.colorize(f0).astype(int) - viz.colorize(f1).astype(int))
    assert diff.max() <= 1 and (diff == 0).mean() > 0.99


@pytest.mark.parametrize("c", [2.0, 0.25])
def test_relative_saturation(c):
    m, a = mixed()
    f = FlowField(m * np.sin(a), m * np.cos(a))
    g = FlowField(c * f.u, c * f.v)
    np.testing.assert_array_equal(viz.colorize(f), viz.colorize(g))


def weak_background_field():
    u = np.full((24, 24), 0.2)
    v = np.zeros((24, 24))
    u[8:16, 8:16] = 2.0
    v[8:16, 8:16] = 1.0
    return FlowField(u, v), np.ones((24, 24), bool) & ~np.pad(np.ones((8, 8), bool), 8)


def test_gamma_panels_fade_background():
    f, bg = weak_background_field()
    peak = float(f.magnitude().max())
    sats = []
    for g in (5.0, 0.5, 0.1):
        img = viz.colorize(correct(f, CorrectionParams(g)), peak)
        sats.append(viz.saturation(img)[bg].mean())
    assert sats[0] > sats[1] > sats[2] > 0


def test_side_by_side(tmp_path):
    f, _ = weak_background_field()
    panels = [correct(f, CorrectionParams(g)) for g in (0.1, 1.0, 5.0)]
    img = viz.side_by_side(panels, ["a", "b", "c"])
    assert img.shape == (24 + 14, 3 * 24 + 2 * 4, 3)
    viz.save_png(img, tmp_path / "p.png")
    assert (tmp_path / "p.png").stat().st_size > 0
    with pytest.raises(ValueError):
        viz.side_by_side(panels, ["a"])
