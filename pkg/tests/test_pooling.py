import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spxrefine import LabelMap, Rect, RgbImage, ValidationError, compute_stats, pool_features, pool_scalar
from spxrefine.pooling import pooled_matrix


def test_compute_stats_simple():
    lm = LabelMap(np.array([[0, 0], [1, 1]]))
    img = RgbImage(np.full((2, 2, 3), 0.5))
    stats = compute_stats(lm, img)
    assert stats.areas.tolist() == [2, 2]
    np.testing.assert_allclose(stats.mean_colors, 0.5)
    assert stats.adjacency == frozenset({(0, 1)})
    assert stats.bbox(0).h == 1 and stats.bbox(0).w == 2
    np.testing.assert_allclose(stats.centroids[0], [0.5, 0.0])


def test_compute_stats_single_label():
    lm = LabelMap(np.zeros((3, 3), dtype=int))
    stats = compute_stats(lm, RgbImage(np.zeros((3, 3, 3))))
    assert stats.adjacency == frozenset()
    assert stats.neighbors(0) == []


def test_compute_stats_partition_area(rng):
    raw = rng.integers(0, 9, size=(16, 16))
    _, dense = np.unique(raw, return_inverse=True)
    lm = LabelMap(dense.reshape(16, 16))
    stats = compute_stats(lm, RgbImage(rng.random((16, 16, 3))))
    assert stats.areas.sum() == 256
    for a, b in stats.adjacency:
        assert a < b  # no self-adjacency, ordered pairs


def test_pool_scalar_constant_field():
    lm = LabelMap(np.array([[0, 0, 1], [0, 1, 1]]))
    window = Rect(0, 0, 3, 2)
    out = pool_scalar(lm, np.full((2, 3), 0.7), window)
    assert {pv.id for pv in out} == {0, 1}
    for pv in out:
        assert pv.values[0] == pytest.approx(0.7)


def test_pool_scalar_mean_and_absence():
    lm = LabelMap(np.array([[0, 0, 1, 2, 2]]))
    field = np.array([[0.2, 0.6, 1.0]])
    out = {pv.id: pv for pv in pool_scalar(lm, field, Rect(0, 0, 3, 1))}
    assert out[0].values[0] == pytest.approx(0.4)  # (0.2 + 0.6) / 2
    assert out[0].support == 2
    assert out[1].values[0] == pytest.approx(1.0)
    assert 2 not in out  # superpixel fully outside the window


def test_pool_scalar_window_partially_outside():
    lm = LabelMap(np.zeros((4, 4), dtype=int))
    field = np.full((4, 4), 0.5)
    out = pool_scalar(lm, field, Rect(-2, -2, 4, 4))  # only 2x2 overlaps
    assert out[0].support == 4
    with pytest.raises(ValidationError):
        pool_scalar(lm, field, Rect(10, 10, 4, 4))


def test_pool_features_constant_and_single_pixel(rng):
    lm = LabelMap(np.array([[0, 1], [1, 1]]))
    fm = np.full((2, 2, 4), 0.25, dtype=np.float32)
    out = pool_features(lm, fm)
    for pv in out:
        np.testing.assert_allclose(pv.values, 0.25)
    fm2 = rng.standard_normal((2, 2, 4)).astype(np.float32)
    out2 = pool_features(lm, fm2)
    np.testing.assert_allclose(out2[0].values, fm2[0, 0].astype(np.float64))
    assert out2[0].support == 1


def test_pool_features_matches_naive_loop(rng):
    raw = rng.integers(0, 5, size=(8, 8))
    _, dense = np.unique(raw, return_inverse=True)
    lm = LabelMap(dense.reshape(8, 8))
    fm = rng.standard_normal((8, 8, 4)).astype(np.float32)
    out = pool_features(lm, fm)
    for pv in out:
        acc = np.zeros(4)
        n = 0
        for r in range(8):
            for c in range(8):
                if lm.labels[r, c] == pv.id:
                    acc += fm[r, c]
                    n += 1
        np.testing.assert_allclose(pv.values, acc / n, rtol=1e-6)
        assert pv.support == n


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_pool_scalar_linearity_and_bounds(seed):
    rng = np.random.default_rng(seed)
    raw = rng.integers(0, 4, size=(6, 6))
    _, dense = np.unique(raw, return_inverse=True)
    lm = LabelMap(dense.reshape(6, 6))
    window = Rect(1, 1, 4, 4)
    f = rng.random((4, 4))
    g = rng.random((4, 4))
    a, b = 2.0, -0.5
    lhs = {pv.id: pv.values[0] for pv in pool_scalar(lm, a * f + b * g, window)}
    pf = {pv.id: pv.values[0] for pv in pool_scalar(lm, f, window)}
    pg = {pv.id: pv.values[0] for pv in pool_scalar(lm, g, window)}
    for s in lhs:
        assert lhs[s] == pytest.approx(a * pf[s] + b * pg[s], abs=1e-6)
        assert 0.0 - 1e-12 <= pf[s] <= 1.0 + 1e-12  # f bounded in [0, 1]


def test_pooled_prior_area_weighted_mean(rng):
    raw = rng.integers(0, 6, size=(10, 10))
    _, dense = np.unique(raw, return_inverse=True)
    lm = LabelMap(dense.reshape(10, 10))
    window = Rect(2, 3, 6, 5)
    field = rng.random((5, 6))
    pooled = pool_scalar(lm, field, window)
    total = sum(pv.values[0] * pv.support for pv in pooled)
    support = sum(pv.support for pv in pooled)
    assert total / support == pytest.approx(field.mean(), abs=1e-6)


def test_pooled_matrix_shape():
    lm = LabelMap(np.array([[0, 1]]))
    fm = np.ones((1, 2, 3), dtype=np.float32)
    mat = pooled_matrix(pool_features(lm, fm), 2)
    assert mat.shape == (2, 3)
