import numpy as np
import pytest

from spxrefine import (
    CoarseProposal,
    LabelMap,
    LevelBundle,
    MlpWeights,
    RefineBatchError,
    Rect,
    ValidationError,
    refine,
    refine_batch,
    upsample_window,
)


def window(values):
    grid = np.zeros((40, 40))
    grid[: len(values), : len(values[0])] = values
    return grid


def test_upsample_constant():
    cp = CoarseProposal(np.full((40, 40), 0.3), Rect(0, 0, 17, 63), 0, 1.0)
    out = upsample_window(cp)
    assert out.shape == (63, 17)
    np.testing.assert_allclose(out, 0.3)


def test_upsample_identity_at_native_size():
    grid = np.random.default_rng(0).random((40, 40))
    cp = CoarseProposal(grid, Rect(5, 5, 40, 40), 0, 1.0)
    np.testing.assert_array_equal(upsample_window(cp), grid)


def test_upsample_bilinear_center():
    # 2x2 corner grid upsampled to 3x3: the center target pixel maps to
    # source coordinate (0.5, 0.5), the exact midpoint of all four samples
    from spxrefine.refine import bilinear_upsample

    grid = np.array([[0.0, 1.0], [1.0, 0.0]])
    u = (1 + 0.5) * (2 / 3) - 0.5
    assert u == pytest.approx(0.5)
    expected = 0.25 * (grid[0, 0] + grid[0, 1] + grid[1, 0] + grid[1, 1])
    out = bilinear_upsample(grid, 3, 3)
    assert out[1, 1] == pytest.approx(expected)
    assert out[0, 0] == pytest.approx(0.0)  # clamped corner keeps its sample
    assert out[2, 2] == pytest.approx(0.0)


def make_bundle(labels, feature_value=0.5, dim=2, level=0):
    lm = LabelMap(np.asarray(labels))
    fm = np.full((lm.height, lm.width, dim), feature_value, dtype=np.float32)
    return LevelBundle.build(level, lm, fm)


def prior_only_classifier(dim):
    """Logit = 40 * prior - 20: decision is exactly 'prior > 0.5'."""
    w1 = np.zeros((4, 1 + dim))
    w1[0, 0] = 1.0  # pass the prior through one ReLU unit
    layers = [
        (w1, np.zeros(4)),
        (np.eye(4), np.zeros(4)),
        (np.eye(4), np.zeros(4)),
        (np.array([[40.0, 0.0, 0.0, 0.0]]), np.array([-20.0])),
    ]
    return MlpWeights(layers)


def zero_classifier(dim):
    layers = [
        (np.zeros((4, 1 + dim)), np.zeros(4)),
        (np.zeros((4, 4)), np.zeros(4)),
        (np.zeros((4, 4)), np.zeros(4)),
        (np.zeros((1, 4)), np.zeros(1)),
    ]
    return MlpWeights(layers)


def test_refine_aligned_proposal_recovers_thresholded_window():
    # 8x8 image of 2x2-aligned superpixels; window probabilities constant per
    # superpixel, so pooling is lossless and the refined mask equals the
    # thresholded upsampled proposal
    labels = np.repeat(np.repeat(np.arange(16).reshape(4, 4), 2, axis=0), 2, axis=1)
    bundle = make_bundle(labels)
    grid = np.zeros((40, 40))
    # window covers the full 8x8 image; 40/8 = 5 cells per pixel, 10 per spx
    per_spx = np.random.default_rng(3).random((4, 4))
    grid = np.repeat(np.repeat(per_spx, 10, axis=0), 10, axis=1)
    cp = CoarseProposal(grid, Rect(0, 0, 8, 8), 0, 0.9)
    rp = refine(cp, bundle, prior_only_classifier(2), threshold=0.5)
    expected = np.repeat(np.repeat(per_spx > 0.5, 2, axis=0), 2, axis=1)
    np.testing.assert_array_equal(rp.mask.bits, expected)
    assert rp.score == 0.9


def test_refine_zero_window_empty_mask():
    labels = np.zeros((6, 6), dtype=int)
    bundle = make_bundle(labels)
    cp = CoarseProposal(np.zeros((40, 40)), Rect(0, 0, 6, 6), 0, 0.5)
    rp = refine(cp, bundle, zero_classifier(2), threshold=0.5)
    assert rp.mask.area == 0  # probability exactly 0.5 -> background
    assert rp.superpixel_ids == ()


def test_refine_mask_is_union_of_superpixels(rng):
    raw = rng.integers(0, 7, size=(12, 12))
    _, dense = np.unique(raw, return_inverse=True)
    bundle = make_bundle(dense.reshape(12, 12))
    cp = CoarseProposal(rng.random((40, 40)), Rect(2, 2, 7, 9), 0, 1.0)
    rp = refine(cp, bundle, prior_only_classifier(2), 0.5)
    rebuilt = np.isin(bundle.label_map.labels, np.array(rp.superpixel_ids))
    np.testing.assert_array_equal(rp.mask.bits, rebuilt)
    # off-window superpixels keep probability 0
    window_ids = set(np.unique(bundle.label_map.labels[2:11, 2:9]))
    for s in range(bundle.label_map.count):
        if s not in window_ids:
            assert rp.probabilities[s] == 0.0


def test_refine_level_and_dim_mismatch():
    bundle = make_bundle(np.zeros((4, 4), dtype=int), level=1)
    cp = CoarseProposal(np.zeros((40, 40)), Rect(0, 0, 4, 4), 0, 1.0)
    with pytest.raises(ValidationError):
        refine(cp, bundle, zero_classifier(2))
    cp1 = CoarseProposal(np.zeros((40, 40)), Rect(0, 0, 4, 4), 1, 1.0)
    with pytest.raises(ValidationError):
        refine(cp1, bundle, zero_classifier(5))


def test_refine_batch_matches_single_and_preserves_order(rng):
    bundle0 = make_bundle(np.arange(36).reshape(6, 6) // 6)  # six row stripes
    bundle1 = make_bundle(np.zeros((6, 6), dtype=int), level=1)
    w = prior_only_classifier(2)
    cps = [
        CoarseProposal(rng.random((40, 40)), Rect(0, 0, 6, 6), 0, 0.3),
        CoarseProposal(rng.random((40, 40)), Rect(1, 1, 4, 4), 1, 0.9),
        CoarseProposal(rng.random((40, 40)), Rect(0, 2, 5, 3), 0, 0.6),
    ]
    batch = refine_batch(cps, {0: bundle0, 1: bundle1}, w)
    singles = [refine(cp, {0: bundle0, 1: bundle1}[cp.level], w) for cp in cps]
    for got, want in zip(batch, singles):
        np.testing.assert_array_equal(got.mask.bits, want.mask.bits)
        assert got.level == want.level

    perm = [2, 0, 1]
    permuted = refine_batch([cps[i] for i in perm], {0: bundle0, 1: bundle1}, w)
    for got, src in zip(permuted, perm):
        np.testing.assert_array_equal(got.mask.bits, batch[src].mask.bits)


def test_refine_batch_aggregates_errors(rng):
    bundle = make_bundle(np.zeros((6, 6), dtype=int))
    good = CoarseProposal(rng.random((40, 40)), Rect(0, 0, 6, 6), 0, 1.0)
    bad = CoarseProposal(rng.random((40, 40)), Rect(0, 0, 6, 6), 3, 1.0)  # no bundle
    with pytest.raises(RefineBatchError) as exc:
        refine_batch([good, bad, good], {0: bundle}, prior_only_classifier(2))
    assert [i for i, _ in exc.value.failures] == [1]
