import numpy as np
import pytest

from flowdyn.corpus import CorpusSpec, MotionProfile, Scene, generate, generate_clips, ground_truth_flow
from flowdyn.correction import decompose, dominant_magnitude
from flowdyn.errors import ActorExceedsFrame


def spec(**kw):
    base = dict(classes=(MotionProfile(speed=1.0), MotionProfile(direction=90.0, speed=0.5)), clips_per_class=2, frames_per_clip=6, height=32, width=32)
    base.update(kw)
    return CorpusSpec(**base)


def test_deterministic():
    a = generate_clips(spec(noise_sigma=0.02, seed=3))
    b = generate_clips(spec(noise_sigma=0.02, seed=3))
    c = generate_clips(spec(noise_sigma=0.02, seed=4))
    assert all(np.array_equal(x, y) for p, q in zip(a, b) for x, y in zip(p.frames, q.frames))
    assert not np.array_equal(a[0].frames[0], c[0].frames[0])


def test_labels_and_ids():
    clips = generate_clips(spec())
    assert [c.label for c in clips] == [0, 0, 1, 1]
    assert len({c.clip_id for c in clips}) == 4
    assert all(0 <= f.min() and f.max() <= 1 for c in clips for f in c.frames)


def test_actor_flow_inside_sprite():
    sc = Scene(spec(), 0)
    f = sc.flow(2)
    _, _, inside = sc.actor.local(*np.indices((32, 32), dtype=np.float64)[::-1], 2)
    assert inside.sum() > 100
    assert np.allclose(f.u[inside], 1.0) and np.allclose(f.v[inside], 0.0)
    assert np.allclose(f.u[~inside], 0.0)


def test_pan_is_dominant_motion():
    s = spec(classes=(MotionProfile(speed=1.0, actor_size=8, pan=(0.5, 0.0)),), clips_per_class=1)
    f = ground_truth_flow(s, 0, 1)
    p = decompose(f)
    assert dominant_magnitude(p.m) * p.scale == pytest.approx(0.5)


def test_stride_ground_truth_scales():
    s = spec()
    f1 = ground_truth_flow(s, 0, 0, 1)
    f3 = ground_truth_flow(s, 0, 0, 3)
    moving = f1.magnitude() > 0
    assert np.allclose(f3.u[moving], 3 * f1.u[moving]) and f3.stride == 3
    with pytest.raises(IndexError):
        ground_truth_flow(s, 0, 4, 3)


def test_actor_too_large():
    with pytest.raises(ActorExceedsFrame):
        Scene(spec(classes=(MotionProfile(actor_size=40),)), 0)


def test_spec_round_trip():
    s = spec(noise_sigma=0.01)
    assert CorpusSpec.from_dict(s.to_dict()) == s


def test_rendered_motion_matches_ground_truth():
    s = spec(classes=(MotionProfile(speed=1.0, actor_size=12),), clips_per_class=1)
    (clip, gt), = generate(s)
    sc = Scene(s, 0)
    yy, xx = np.indices((32, 32))
    f = gt[1]
    inside = f.magnitude() > 0
    # every actor pixel reappears one pixel to the right in the next frame
    xs, ys = xx[inside] + 1, yy[inside]
    ok = xs < 32
    assert np.allclose(clip.frames[2][ys[ok], xs[ok]], clip.frames[1][yy[inside][ok], xx[inside][ok]], atol=1e-9)
    assert len(gt) == 5 and sc.label == 0
