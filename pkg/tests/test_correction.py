import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_field
from flowdyn import correction as cor
from flowdyn.correction import CorrectionParams, Rescale, correct
from flowdyn.errors import InvalidGamma
from flowdyn.flow import FlowField, Source

unit = st.floats(0.0, 1.0, allow_nan=False)
gammas = st.floats(1e-3, 10.0, allow_nan=False)


@given(gammas)
def test_fixed_points(g):
    out = cor.power_normalize_values(np.array([0.0, 1.0]), g)
    assert out[0] == 0.0 and out[1] == 1.0


@given(unit, unit, gammas)
def test_monotone_in_m(a, b, g):
    lo, hi = sorted((a, b))
    pa, pb = cor.power_normalize_values(np.array([lo, hi]), g)
    assert pa <= pb


@given(unit, gammas)
def test_boost_and_suppress(m, g):
    p = float(cor.power_normalize_values(m, g))
    if g > 1:
        assert p >= m
    elif g < 1:
        assert p <= m
    assert 0.0 <= p <= 1.0


@given(st.floats(-1.0, 1.0, allow_nan=False), gammas)
def test_odd_symmetry(m, g):
    assert cor.power_normalize_values(-m, g) == -cor.power_normalize_values(m, g)


def test_gamma_one_is_identity(rng):
    m = rng.random(1000)
    assert np.array_equal(cor.power_normalize_values(m, 1.0), m)


@pytest.mark.parametrize(
    "m,g,expected",
    [(0.5, 2.0, 0.75), (0.5, 0.5, 0.2928932), (0.1, 5.0, 0.40951), (0.1, 0.1, 0.0104806)],
)
def test_worked_values(m, g, expected):
    assert cor.power_normalize_values(m, g) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("g", [0.0, -1.0, np.nan, np.inf])
def test_invalid_gamma(g):
    with pytest.raises(InvalidGamma):
        CorrectionParams(g)
    with pytest.raises(InvalidGamma):
        cor.power_normalize_values(0.5, g)


def test_decompose_single_vector():
    p = cor.decompose(FlowField(np.array([[3.0]]), np.array([[4.0]])))
    assert p.m[0, 0] == 1.0 and p.scale == 5.0
    assert p.phi[0, 0] == pytest.approx(np.arctan2(3, 4))
    assert p.phi[0, 0] == pytest.approx(0.6435011)


def test_decompose_phi_range():
    p = cor.decompose(FlowField(np.array([[-0.0, 0.0]]), np.array([[-2.0, 0.0]])))
    assert p.phi[0, 0] == pytest.approx(np.pi)
    assert p.phi[0, 1] == 0.0  # zero vector


def test_zero_field_stays_zero():
    out = correct(FlowField.zeros(4, 5), CorrectionParams(5.0, subtract_dominant=True))
    assert not out.u.any() and not out.v.any()


def test_recompose_example():
    polar = cor.PolarFlow(np.array([[1.0]]), np.array([[np.pi / 2]]), 2.0)
    f = cor.recompose(polar)
    assert f.u[0, 0] == pytest.approx(2.0) and f.v[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert f.source is Source.CORRECTED


def test_keep_normalized_caps_magnitude(rng):
    f = random_field(rng, 8, 8, scale=10.0)
    out = correct(f, CorrectionParams(2.0, rescale=Rescale.KEEP_NORMALIZED))
    assert out.magnitude().max() == pytest.approx(1.0)


def test_dominant_magnitude_ninety_ten():
    m = np.concatenate([np.full(90, 0.3), np.full(10, 1.0)])
    assert cor.dominant_magnitude(m) == pytest.approx(0.3)
    polar = cor.PolarFlow(m.reshape(10, 10), np.zeros((10, 10)))
    sub = cor.subtract_dominant(polar)
    assert sub.m.max() == pytest.approx(0.7)
    assert np.count_nonzero(sub.m) == 10


def test_subtract_dominant_on_constant_field():
    f = FlowField(np.full((6, 6), 2.0), np.full((6, 6), -1.0))
    out = correct(f, CorrectionParams(1.0, subtract_dominant=True))
    assert np.abs(out.u).max() == 0 and np.abs(out.v).max() == 0


def test_stage_order():
    trace = []
    correct(FlowField.zeros(2, 2), CorrectionParams(2.0, subtract_dominant=True), trace)
    assert trace == ["decompose", "subtract_dominant", "power_normalize", "recompose"]
    trace = []
    correct(FlowField.zeros(2, 2), CorrectionParams(2.0), trace)
    assert "subtract_dominant" not in trace


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), gammas)
def test_direction_preserved(seed, g):
    f = random_field(np.random.default_rng(seed), 6, 7)
    out = correct(f, CorrectionParams(g))
    mag = f.magnitude()
    ok = (mag > 1e-9) & (out.magnitude() > 1e-12)
    a0 = np.arctan2(f.u, f.v)[ok]
    a1 = np.arctan2(out.u, out.v)[ok]
    d = np.angle(np.exp(1j * (a1 - a0)))
    assert np.abs(d).max() < 1e-6


def test_restore_scale_keeps_peak(rng):
    f = random_field(rng, 10, 10)
    for g in (0.2, 3.0):
        out = correct(f, CorrectionParams(g))
        assert out.magnitude().max() == pytest.approx(f.magnitude().max())


def test_stride_carried(rng):
    f = random_field(rng, 3, 3, stride=6)
    assert correct(f, CorrectionParams(0.5)).stride == 6


def test_large_gamma_lifts_weak_motion():
    u = np.array([[0.05, 1.0]])
    out = correct(FlowField(u, np.zeros_like(u)), CorrectionParams(5.0))
    assert out.u[0, 0] > 0.2 and out.u[0, 1] == pytest.approx(1.0)
    out = correct(FlowField(u, np.zeros_like(u)), CorrectionParams(0.1))
    assert out.u[0, 0] < 0.01
