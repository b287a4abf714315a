import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cvpool.contrast import CvpConfig
from cvpool.errors import DegenerateFeatureMapError
from cvpool.pooling import (
    PoolingSpec,
    pool,
    pool_cvp,
    pool_max,
    pool_minkowski,
    pool_top_x,
    pooled_count,
)

from .conftest import make_map
from .oracles import top_x_mean

maps = arrays(
    np.float64,
    st.tuples(st.integers(1, 9), st.integers(1, 9)),
    elements=st.floats(0, 1),
)


def test_max_simple():
    assert pool_max(make_map([0.1, 0.9, 0.3])).values[0] == 0.9


def test_max_skips_invalid():
    res = pool_max(make_map([0.1, 0.9, 0.3], valid=[[True, False, True]]))
    assert res.values[0] == 0.3


@pytest.mark.parametrize("p, values, expected", [(1, [0.2, 0.4], 0.3), (2, [0.6, 0.8], math.sqrt(0.5))])
def test_minkowski_examples(p, values, expected):
    assert pool_minkowski(make_map(values), p).values[0] == pytest.approx(expected, abs=1e-12)


def test_minkowski_large_p_approaches_max():
    v = pool_minkowski(make_map([0.2, 0.4, 0.8]), 256).values[0]
    assert abs(v - 0.8) / 0.8 < 0.01


def test_minkowski_survives_tiny_values():
    v = pool_minkowski(make_map([1e-200, 2e-200]), 8).values[0]
    assert 1e-200 < v < 2e-200


@pytest.mark.parametrize("p", [0.5, math.inf])
def test_minkowski_rejects_norm(p):
    with pytest.raises(ValueError):
        pool_minkowski(make_map([0.1]), p)


def test_top_x_twenty_percent():
    res = pool_top_x(make_map(np.arange(1, 11) / 10), 20)
    assert res.values[0] == pytest.approx(0.95, abs=1e-15)
    assert res.count[0] == 2 and res.threshold[0] == 0.9


def test_top_x_ties_pool_everything_at_threshold():
    res = pool_top_x(make_map([0.5, 0.5, 0.5, 0.2]), 25)
    assert res.count[0] == 3 and res.values[0] == 0.5


def test_top_x_full_is_mean(rng):
    v = rng.random((6, 7))
    assert pool_top_x(make_map(v), 100).values[0] == pytest.approx(v.mean(), abs=1e-12)


@pytest.mark.parametrize("x, n, expected", [(0.001, 50, 1), (50, 5, 3), (25, 10, 3), (10, 14, 1), (100, 7, 7)])
def test_pooled_count_rounds_half_up(x, n, expected):
    assert pooled_count(x, n) == expected


def test_per_channel_percentages(rng):
    v = rng.random((3, 10, 10))
    res = pool_top_x(make_map(v), [1, 50, 100])
    assert res.values[0] == v[0].max()
    assert res.values[2] == pytest.approx(v[2].mean(), abs=1e-12)
    assert res.count.tolist() == [1, 50, 100]


@pytest.mark.parametrize("x", [0, -1, 100.5, math.nan])
def test_top_x_rejects_percentage(x):
    with pytest.raises(ValueError):
        pool_top_x(make_map([0.1]), x)


@pytest.mark.parametrize("kind", ["max", "minkowski:2", "top_x:5", "cvp"])
def test_no_valid_pixels(kind):
    with pytest.raises(DegenerateFeatureMapError):
        pool(make_map(np.ones((3, 3)), valid=np.zeros((3, 3))), PoolingSpec.parse(kind))


@settings(max_examples=150, deadline=None)
@given(values=maps, x=st.floats(0.01, 100))
def test_top_x_matches_sort_oracle(values, x):
    res = pool_top_x(make_map(values), x)
    mean, thr, count = top_x_mean(values.ravel(), x)
    assert abs(res.values[0] - mean) <= 1e-12
    assert res.threshold[0] == thr and res.count[0] == count


@settings(max_examples=80, deadline=None)
@given(values=maps, x=st.lists(st.floats(0.01, 100), min_size=2, max_size=2).map(sorted))
def test_top_x_non_increasing_in_x(values, x):
    lo, hi = (pool_top_x(make_map(values), xi).values[0] for xi in x)
    assert hi <= lo + 1e-15


@settings(max_examples=80, deadline=None)
@given(values=maps)
def test_limits(values):
    m = make_map(values)
    assert pool_top_x(m, 1e-6).values[0] == pool_max(m).values[0]
    assert abs(pool_minkowski(m, 1).values[0] - pool_top_x(m, 100).values[0]) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(values=arrays(np.float64, (6, 6), elements=st.floats(0.1, 1)))
def test_minkowski_high_norm_close_to_max(values):
    m = make_map(values)
    top = pool_max(m).values[0]
    assert abs(pool_minkowski(m, 2048).values[0] - top) / top < 0.005


@settings(max_examples=60, deadline=None)
@given(
    values=maps,
    s=st.floats(1e-3, 1e3),
    spec=st.sampled_from(["max", "minkowski:1", "minkowski:3.5", "top_x:10", "top_x:100"]),
)
def test_scale_equivariance(values, s, spec):
    p = PoolingSpec.parse(spec)
    a = pool(make_map(values), p).values[0]
    b = pool(make_map(values * s), p).values[0]
    assert b == pytest.approx(s * a, rel=1e-9, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(
    values=maps,
    spec=st.sampled_from(["max", "minkowski:1", "minkowski:7", "top_x:0.5", "top_x:30", "cvp"]),
)
def test_pooled_within_range(values, spec):
    if spec == "cvp" and values.size < 2:
        return
    v = pool(make_map(values), PoolingSpec.parse(spec)).values[0]
    assert values.min() - 1e-12 <= v <= values.max() + 1e-12


def test_cvp_constant_map():
    res = pool_cvp(make_map(np.full((8, 8), 0.42)))
    np.testing.assert_array_equal(res.x_used, 100.0)
    np.testing.assert_allclose(res.values, 0.42, atol=1e-15)


def test_cvp_checkerboard_pools_little():
    y, x = np.mgrid[0:32, 0:32]
    res = pool_cvp(make_map(((x + y) % 2).astype(float)), CvpConfig(sigma=1))
    assert np.all(res.x_used < 3.0)
    assert np.all(res.values == 1.0)


def test_cvp_higher_contrast_channel_pools_less(rng):
    base = rng.random((40, 40))
    v = np.stack([base, 0.5 + 0.05 * base, 0.5 + 0.01 * base])
    res = pool_cvp(make_map(v))
    assert res.x_used[0] < res.x_used[2]
    assert res.count[0] < res.count[2]


def test_cvp_is_top_x_at_its_own_percentage(rng):
    m = make_map(rng.random((3, 20, 20)))
    res = pool_cvp(m)
    np.testing.assert_array_equal(res.values, pool_top_x(m, res.x_used).values)


def test_binned_mode_on_8bit_levels():
    levels = np.arange(256) / 255
    m = make_map(levels)
    exact = pool_top_x(m, 10)
    binned = pool_top_x(m, 10, binned=True)
    np.testing.assert_allclose(binned.values, exact.values, atol=1e-12)
    assert binned.count[0] == exact.count[0] == 26


def test_binned_mode_merges_close_values():
    res = pool_top_x(make_map([1.0, 0.999, 0.1, 0.2]), 25, binned=True)
    assert res.count[0] == 2  # 0.999 rounds into the top bin


@pytest.mark.parametrize(
    "text, label",
    [("max", "max"), ("cvp", "cvp"), ("minkowski:2", "minkowski:2"), ("top_x:5.5", "top_x:5.5")],
)
def test_spec_parse_label(text, label):
    assert PoolingSpec.parse(text).label == label


@pytest.mark.parametrize("text", ["median", "minkowski", "minkowski:0.5", "top_x:0", "top_x:abc", "max:2"])
def test_spec_parse_rejects(text):
    with pytest.raises(ValueError):
        PoolingSpec.parse(text)
