import numpy as np
import pytest

from spxrefine import (
    BinaryMask,
    GtObject,
    LabelMap,
    MetricsConfig,
    aiou,
    average_recall,
    avg_iou,
    boundary_recall,
    evaluate_dataset,
    exhaustive_gt_set,
    oversegmentation_error,
    undersegmentation_error,
)
from spxrefine.metrics import boundary_pixels


def gt(bits, oid=0):
    return GtObject(oid, BinaryMask(np.asarray(bits, dtype=bool)))


def mask(bits):
    return BinaryMask(np.asarray(bits, dtype=bool))


def test_default_thresholds():
    cfg = MetricsConfig()
    assert len(cfg.ar_iou_thresholds) == 10
    assert cfg.ar_iou_thresholds[0] == 0.5
    assert cfg.ar_iou_thresholds[-1] == 0.95


def test_ar_exact_gt_proposals():
    g = np.zeros((20, 20), dtype=bool)
    g[3:9, 3:9] = True
    h = np.zeros((20, 20), dtype=bool)
    h[12:18, 10:19] = True
    gts = [gt(g, 0), gt(h, 1)]
    props = [(mask(g), 0.9), (mask(h), 0.8)]
    ar, *_ = average_recall([props], [gts])
    assert ar[10] == 1.0 and ar[100] == 1.0


def test_ar_no_proposals_zero():
    g = np.ones((5, 5), dtype=bool)
    ar, *_ = average_recall([[]], [[gt(g)]])
    assert ar[10] == 0.0


def test_ar_single_iou_06():
    # proposal/GT IoU = 3/5 = 0.6 -> recalled at thresholds 0.5, 0.55, 0.6
    g = np.zeros((3, 4), dtype=bool)
    g[0, :4] = True  # 4 px
    p = np.zeros((3, 4), dtype=bool)
    p[0, :3] = True
    p[1, 0] = True  # 3 shared, union 5
    ar, *_ = average_recall([[(mask(p), 1.0)]], [[gt(g)]])
    assert ar[10] == pytest.approx(3 / 10)


def test_ar_monotone_in_budget(rng):
    gts, props = [], []
    for _ in range(4):
        bits = rng.random((16, 16)) < 0.3
        if not bits.any():
            bits[0, 0] = True
        gts.append([gt(bits)])
        ps = [(mask(rng.random((16, 16)) < 0.3), float(rng.random())) for _ in range(30)]
        props.append(ps)
    ar, *_ = average_recall(props, gts, MetricsConfig(budgets=(1, 5, 10, 30)))
    values = [ar[n] for n in (1, 5, 10, 30)]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


def test_ar_size_splits():
    small = np.zeros((200, 200), dtype=bool)
    small[0:10, 0:10] = True  # 100 < 32^2
    large = np.zeros((200, 200), dtype=bool)
    large[50:190, 50:190] = True  # 19600 >= 96^2... 140^2 = 19600 >= 9216
    gts = [gt(small, 0), gt(large, 1)]
    props = [(mask(small), 1.0)]
    ar, ar_s, ar_m, ar_l = average_recall([props], [gts])
    assert ar_s[10] == 1.0
    assert ar_l[10] == 0.0
    assert ar[10] == 0.5


def test_boundary_pixels_frame_counts():
    b = boundary_pixels(np.zeros((4, 5), dtype=int))
    assert b[0].all() and b[-1].all() and b[:, 0].all() and b[:, -1].all()
    assert not b[1:-1, 1:-1].any()


def test_br_identical_partitions():
    labels = np.zeros((10, 10), dtype=int)
    labels[:, 5:] = 1
    assert boundary_recall(labels, labels, 2) == 1.0


def test_br_single_superpixel_vs_internal_boundary():
    # GT: vertical boundary at column 5 in a 12x12 image; prediction has no
    # interior boundary, so only the frame ring counts as predicted boundary
    gt_labels = np.zeros((12, 12), dtype=int)
    gt_labels[:, 6:] = 1
    pred = np.zeros((12, 12), dtype=int)
    eps = 2
    gt_b = boundary_pixels(gt_labels)
    pred_b = boundary_pixels(pred)
    # count directly: GT boundary pixels within Chebyshev eps of the frame
    hits = 0
    total = 0
    H = W = 12
    for r in range(H):
        for c in range(W):
            if not gt_b[r, c]:
                continue
            total += 1
            near = False
            for rr in range(max(0, r - eps), min(H, r + eps + 1)):
                for cc in range(max(0, c - eps), min(W, c + eps + 1)):
                    if pred_b[rr, cc]:
                        near = True
            if near:
                hits += 1
    expected = hits / total
    assert boundary_recall(pred, gt_labels, eps) == pytest.approx(expected)
    assert expected < 1.0  # interior boundary pixels are missed


def test_br_large_tolerance_is_one():
    gt_labels = np.zeros((8, 8), dtype=int)
    gt_labels[2:5, 2:7] = 1
    pred = np.zeros((8, 8), dtype=int)
    assert boundary_recall(pred, gt_labels, 8) == 1.0


def test_br_monotone_in_tolerance(rng):
    gt_labels = (rng.random((16, 16)) < 0.5).astype(int)
    pred = (rng.random((16, 16)) < 0.5).astype(int)
    vals = [boundary_recall(pred, gt_labels, e) for e in range(0, 6)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_ue_identity_and_extremes():
    gt_labels = np.zeros((10, 10), dtype=int)
    gt_labels[:, 5:] = 1
    assert undersegmentation_error(gt_labels, gt_labels) == 0.0
    one = np.zeros((10, 10), dtype=int)
    assert undersegmentation_error(one, gt_labels) == pytest.approx(1.0)
    per_pixel = np.arange(100).reshape(10, 10)
    assert undersegmentation_error(per_pixel, gt_labels) == 0.0


def test_oe_identity_split_and_per_pixel():
    gt_labels = np.zeros((10, 10), dtype=int)
    assert oversegmentation_error(gt_labels, gt_labels) == 0.0
    halves = np.zeros((10, 10), dtype=int)
    halves[:, 5:] = 1  # single GT segment split into two superpixels
    assert oversegmentation_error(halves, gt_labels) == pytest.approx(0.5)
    per_pixel = np.arange(100).reshape(10, 10)
    assert oversegmentation_error(per_pixel, gt_labels) == pytest.approx(0.99)


def test_aiou_aligned_and_coarse():
    labels = np.zeros((10, 10), dtype=int)
    labels[:, 5:] = 1
    half = np.zeros((10, 10), dtype=bool)
    half[:, :5] = True
    assert aiou(LabelMap(labels), [gt(half)], "greedy") == 1.0
    one = LabelMap(np.zeros((10, 10), dtype=int))
    assert aiou(one, [gt(half)], "greedy") == pytest.approx(0.5)
    assert aiou(one, [gt(half)], "exhaustive") == pytest.approx(0.5)


def test_aiou_exhaustive_at_least_greedy(rng):
    for _ in range(15):
        raw = rng.integers(0, 6, size=(10, 10))
        _, dense = np.unique(raw, return_inverse=True)
        lm = LabelMap(dense.reshape(10, 10))
        bits = rng.random((10, 10)) < 0.4
        if not bits.any():
            bits[0, 0] = True
        gts = [gt(bits)]
        assert aiou(lm, gts, "exhaustive") >= aiou(lm, gts, "greedy") - 1e-12


def test_avg_iou_exact_and_empty():
    g = np.zeros((6, 6), dtype=bool)
    g[1:4, 2:5] = True
    assert avg_iou([[mask(g)]], [[gt(g)]]) == 1.0
    assert avg_iou([[]], [[gt(g)]]) == 0.0


def test_avg_iou_bounded_by_exhaustive_aiou(rng):
    # proposals that are superpixel unions can never beat the exhaustive optimum
    for _ in range(10):
        raw = rng.integers(0, 5, size=(9, 9))
        _, dense = np.unique(raw, return_inverse=True)
        lm = LabelMap(dense.reshape(9, 9))
        bits = rng.random((9, 9)) < 0.4
        if not bits.any():
            bits[0, 0] = True
        g = gt(bits)
        props = []
        for _ in range(6):
            ids = rng.choice(lm.count, size=rng.integers(1, lm.count + 1), replace=False)
            props.append(mask(np.isin(lm.labels, ids)))
        best = avg_iou([props], [[g]])
        assert best <= exhaustive_gt_set(lm, g).iou + 1e-12


def test_metric_identities_on_gt_partition():
    gt_labels = np.zeros((14, 14), dtype=int)
    gt_labels[2:7, 2:7] = 1
    gt_labels[8:13, 8:13] = 2
    m1 = gt_labels == 1
    m2 = gt_labels == 2
    gts = [gt(m1, 0), gt(m2, 1)]
    lm = LabelMap(gt_labels)
    assert boundary_recall(gt_labels, gt_labels, 2) == 1.0
    assert undersegmentation_error(gt_labels, gt_labels) == 0.0
    assert oversegmentation_error(gt_labels, gt_labels) == 0.0
    assert aiou(lm, gts, "greedy") == 1.0
    ar, *_ = average_recall([[(mask(m1), 0.9), (mask(m2), 0.8)]], [gts])
    assert ar[10] == 1.0


def test_evaluate_dataset_report_roundtrip():
    gt_labels = np.zeros((12, 12), dtype=int)
    gt_labels[3:9, 3:9] = 1
    m = gt_labels == 1
    gts = [gt(m)]
    report = evaluate_dataset(
        [[(mask(m), 1.0)]], [gts], [[LabelMap(gt_labels)]], MetricsConfig()
    )
    assert report.ar[10] == 1.0
    assert report.aiou == 1.0
    assert report.avg_iou == 1.0
    assert report.efficiency == pytest.approx(1.0)
    assert report.br == 1.0 and report.ue == 0.0 and report.oe == 0.0
    data = report.to_dict()
    assert data["n_objects"] == 1
    assert "AR@10" in report.to_table()
