import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urbantree.augment import AugmentParams, _warp, apportion_evenly, augment, oversample_plan
from urbantree.rng import substream


def image(seed=0, shape=(12, 10, 3)):
    return substream(seed, "img").random(shape)


def test_identity_is_bit_exact():
    x = image()
    out = augment(x, AugmentParams.identity(), substream(1))
    assert out.tobytes() == x.tobytes()


def test_hflip_involution():
    x = image()
    p = AugmentParams(0, 0, 0, 1.0, (1, 1), (1, 1))
    once = augment(x, p, substream(2))
    np.testing.assert_array_equal(once, x[:, ::-1])
    np.testing.assert_array_equal(augment(once, p, substream(3)), x)


def test_brightness_scales():
    x = np.full((4, 4, 3), 0.8)
    out = augment(x, AugmentParams(0, 0, 0, 0, (1, 1), (0.5, 0.5)), substream(0))
    np.testing.assert_allclose(out, 0.4)


def test_warp_rotation_180_reverses_both_axes():
    x = image(shape=(9, 7, 2))
    np.testing.assert_allclose(_warp(x, math.pi, 0, 0, 1), x[::-1, ::-1], atol=1e-12)


def test_warp_integer_shift():
    x = image(shape=(8, 8, 1))
    out = _warp(x, 0.0, 0, 2, 1)
    np.testing.assert_allclose(out[:, 2:], x[:, :-2], atol=1e-12)
    out = _warp(x, 0.0, -3, 0, 1)
    np.testing.assert_allclose(out[:-3], x[3:], atol=1e-12)


def test_warp_zoom_keeps_centre():
    x = image(shape=(9, 9, 1))
    out = _warp(x, 0.0, 0, 0, 1.5)
    assert out[4, 4, 0] == pytest.approx(x[4, 4, 0], abs=1e-12)
    # zooming in by 2 maps output (4 + 2d) to input (4 + d)
    out = _warp(x, 0.0, 0, 0, 2.0)
    assert out[6, 8, 0] == pytest.approx(x[5, 6, 0], abs=1e-12)


def test_deterministic_per_seed():
    x = image()
    a = augment(x, AugmentParams(), substream(7, "augment", 0, 3))
    b = augment(x, AugmentParams(), substream(7, "augment", 0, 3))
    c = augment(x, AugmentParams(), substream(7, "augment", 0, 4))
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 3.0), st.floats(0.5, 2.0))
def test_output_in_unit_range(seed, bright_hi, zoom_hi):
    p = AugmentParams(90, 0.5, 0.5, 0.5, (0.5, max(zoom_hi, 0.5)), (0.1, bright_hi))
    out = augment(image(seed, (8, 8, 3)), p, substream(seed))
    assert out.shape == (8, 8, 3)
    assert out.min() >= 0 and out.max() <= 1


def test_float32_preserved():
    out = augment(image().astype(np.float32), AugmentParams(), substream(0))
    assert out.dtype == np.float32


def test_bad_image_shape():
    with pytest.raises(ValueError):
        augment(np.zeros((4, 4)), AugmentParams(), substream(0))


def test_param_validation():
    with pytest.raises(ValueError):
        AugmentParams(hflip_prob=1.5)
    with pytest.raises(ValueError):
        AugmentParams(zoom_range=(1.2, 0.8))


def test_config_round_trip():
    p = AugmentParams(30, 0.1, 0.2, 0.25, (0.9, 1.1), (0.7, 1.3))
    assert AugmentParams.from_config(p.to_config()) == p
    assert AugmentParams.from_config({"horizontal_flip": True, "zoom": 0.1}).zoom_range == (0.9, 1.1)


def test_apportion_evenly():
    np.testing.assert_array_equal(apportion_evenly(7, 3), [3, 2, 2])
    np.testing.assert_array_equal(apportion_evenly(0, 2), [0, 0])


def test_oversample_examples():
    plan = oversample_plan({"A": 50, "B": 100}, 100)
    assert plan["A"].sum() == 50 and (plan["A"] == 1).all()
    assert plan["B"].sum() == 0
    (counts,) = oversample_plan({"A": 30}, 100).values()
    assert list(counts) == [3] * 10 + [2] * 20


def test_oversample_target_too_small():
    with pytest.raises(ValueError, match="below"):
        oversample_plan({"A": 50, "B": 100}, 80)


@given(st.dictionaries(st.text(min_size=1, max_size=3), st.integers(1, 200), min_size=1, max_size=6),
       st.integers(0, 300))
def test_oversample_totals_reach_target(counts, extra):
    target = max(counts.values()) + extra
    plan = oversample_plan(counts, target)
    for cls, n in counts.items():
        assert len(plan[cls]) == n
        assert n + plan[cls].sum() == target
        assert plan[cls].max() - plan[cls].min() <= 1
