"""Evaluation suite: average recall, boundary recall, under-/over-
segmentation error, achievable IoU, average best IoU, and efficiency.

AR follows the COCO convention: IoU thresholds 0.5:0.05:0.95, greedy
one-to-one matching in descending proposal-score order, size splits at
32^2 / 96^2 pixels, budgets applied per image, recall aggregated over the
whole dataset per threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter

from .errors import ValidationError
from .groundtruth import GtObject, exhaustive_gt_set, greedy_gt_set
from .raster import BinaryMask, mask_iou
from .validation import check_label_map, check_mask

SIZE_SMALL = 32 * 32
SIZE_LARGE = 96 * 96


@dataclass(frozen=True)
class MetricsConfig:
    ar_iou_thresholds: tuple = tuple(np.round(np.arange(0.5, 0.96, 0.05), 2))
    budgets: tuple = (10, 100, 1000)
    boundary_tolerance: int = 2
    oe_overlap_fraction: float = 0.05

    def __post_init__(self):
        t = np.asarray(self.ar_iou_thresholds)
        if len(t) == 0 or (np.diff(t) <= 0).any() or t[0] <= 0 or t[-1] > 1:
            raise ValidationError("thresholds must be strictly increasing within (0, 1]")


@dataclass
class MetricsReport:
    ar: dict = field(default_factory=dict)         # budget -> AR
    ar_small: dict = field(default_factory=dict)
    ar_medium: dict = field(default_factory=dict)
    ar_large: dict = field(default_factory=dict)
    br: float = 0.0
    ue: float = 0.0
    oe: float = 0.0
    aiou: float = 0.0
    avg_iou: float = 0.0
    efficiency: float = 0.0
    n_images: int = 0
    n_objects: int = 0

    def to_dict(self):
        return {
            "ar": {str(k): v for k, v in self.ar.items()},
            "ar_small": {str(k): v for k, v in self.ar_small.items()},
            "ar_medium": {str(k): v for k, v in self.ar_medium.items()},
            "ar_large": {str(k): v for k, v in self.ar_large.items()},
            "br": self.br,
            "ue": self.ue,
            "oe": self.oe,
            "aiou": self.aiou,
            "avg_iou": self.avg_iou,
            "efficiency": self.efficiency,
            "n_images": self.n_images,
            "n_objects": self.n_objects,
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)

    def to_table(self):
        rows = [("images", f"{self.n_images}"), ("objects", f"{self.n_objects}")]
        for n in sorted(self.ar):
            rows.append((f"AR@{n}", f"{self.ar[n]:.4f}"))
        for n in sorted(self.ar_small):
            rows.append(
                (
                    f"AR@{n} S/M/L",
                    f"{self.ar_small[n]:.4f} / {self.ar_medium[n]:.4f} / {self.ar_large[n]:.4f}",
                )
            )
        rows += [
            ("BR", f"{self.br:.4f}"),
            ("UE", f"{self.ue:.4f}"),
            ("OE", f"{self.oe:.4f}"),
            ("AIoU", f"{self.aiou:.4f}"),
            ("AVGIoU", f"{self.avg_iou:.4f}"),
            ("efficiency", f"{self.efficiency:.4f}"),
        ]
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


# ---------------------------------------------------------------------------
# Average recall
# ---------------------------------------------------------------------------


def _iou_matrix(masks_a, masks_b):
    out = np.zeros((len(masks_a), len(masks_b)))
    for i, a in enumerate(masks_a):
        for j, b in enumerate(masks_b):
            out[i, j] = mask_iou(a, b)
    return out


def _greedy_match(iou, t):
    """Greedy one-to-one matching; proposals in row order (by score).
    Returns the boolean recalled-flag per GT column."""
    matched = np.zeros(iou.shape[1], dtype=bool)
    for p in range(iou.shape[0]):
        row = np.where(matched, -1.0, iou[p])
        g = int(np.argmax(row)) if iou.shape[1] else -1
        if g >= 0 and row[g] >= t:
            matched[g] = True
    return matched


def average_recall(proposals_per_image, gts_per_image, cfg: MetricsConfig = MetricsConfig()):
    """AR per budget, overall and per GT size class.

    proposals_per_image: per image a list of (mask, score); gts_per_image:
    per image a list of GtObject. Returns (ar, ar_small, ar_medium, ar_large)
    dicts keyed by budget.
    """
    if len(proposals_per_image) != len(gts_per_image):
        raise ValidationError("proposal and gt image counts differ")
    budgets = sorted(cfg.budgets)
    thresholds = np.asarray(cfg.ar_iou_thresholds)
    classes = ("all", "small", "medium", "large")
    # recalled[budget][class][threshold_index], totals[class]
    recalled = {n: {c: np.zeros(len(thresholds)) for c in classes} for n in budgets}
    totals = {c: 0 for c in classes}

    for props, gts in zip(proposals_per_image, gts_per_image):
        if not gts:
            continue
        areas = np.array([g.mask.area for g in gts])
        size_class = np.where(
            areas < SIZE_SMALL, "small", np.where(areas < SIZE_LARGE, "medium", "large")
        )
        totals["all"] += len(gts)
        for c in ("small", "medium", "large"):
            totals[c] += int((size_class == c).sum())
        ordered = sorted(props, key=lambda ms: -ms[1])
        masks = [check_mask(m) for m, _ in ordered]
        iou = _iou_matrix(masks, [g.mask for g in gts])
        for n in budgets:
            sub = iou[:n]
            for ti, t in enumerate(thresholds):
                matched = _greedy_match(sub, t)
                recalled[n]["all"][ti] += matched.sum()
                for c in ("small", "medium", "large"):
                    recalled[n][c][ti] += matched[size_class == c].sum()

    def _ar(klass):
        return {
            n: float(np.mean(recalled[n][klass] / totals[klass])) if totals[klass] else 0.0
            for n in budgets
        }

    return _ar("all"), _ar("small"), _ar("medium"), _ar("large")


# ---------------------------------------------------------------------------
# Segmentation measures
# ---------------------------------------------------------------------------


def boundary_pixels(labels) -> np.ndarray:
    """Pixels with a 4-neighbor of a different label.

    Outside the image counts as a different label, so frame pixels are
    always boundary pixels (a partition with one segment still has its
    outline on the image border).
    """
    lab = np.asarray(labels)
    padded = np.pad(lab, 1, constant_values=-1)
    return (
        (padded[1:-1, :-2] != lab)
        | (padded[1:-1, 2:] != lab)
        | (padded[:-2, 1:-1] != lab)
        | (padded[2:, 1:-1] != lab)
    )


def boundary_recall(pred_labels, gt_labels, tolerance: int = 2) -> float:
    """Fraction of GT boundary pixels within Chebyshev distance `tolerance`
    of a predicted boundary pixel; 1.0 when the GT has no boundary."""
    pred_labels = np.asarray(pred_labels)
    gt_labels = np.asarray(gt_labels)
    if pred_labels.shape != gt_labels.shape:
        raise ValidationError("label map dimension mismatch")
    gt_b = boundary_pixels(gt_labels)
    total = int(gt_b.sum())
    if total == 0:
        return 1.0
    pred_b = boundary_pixels(pred_labels)
    if tolerance > 0:
        pred_b = maximum_filter(pred_b, size=2 * tolerance + 1)
    return float((gt_b & pred_b).sum() / total)


def _contingency(lm_labels, gt_labels):
    lm_labels = np.asarray(lm_labels)
    gt_labels = np.asarray(gt_labels)
    if lm_labels.shape != gt_labels.shape:
        raise ValidationError("label map dimension mismatch")
    n_spx = int(lm_labels.max()) + 1
    n_gt = int(gt_labels.max()) + 1
    flat = gt_labels.ravel().astype(np.int64) * n_spx + lm_labels.ravel().astype(np.int64)
    table = np.bincount(flat, minlength=n_gt * n_spx).reshape(n_gt, n_spx)
    return table


def undersegmentation_error(lm_labels, gt_labels) -> float:
    """Leakage formulation: mean over pixels of min(|s and G|, |s minus G|)
    summed over every (GT segment, overlapping superpixel) pair."""
    table = _contingency(lm_labels, gt_labels)
    areas = table.sum(axis=0)
    n_pixels = int(table.sum())
    inter = table
    leak = np.minimum(inter, areas[None, :] - inter)
    return float(leak[inter > 0].sum() / n_pixels)


def oversegmentation_error(lm_labels, gt_labels, overlap_fraction: float = 0.05) -> float:
    """Fragmentation: mean over GT segments of (n-1)/n where n counts the
    superpixels whose overlap with the segment exceeds `overlap_fraction`
    of their own area (floored at 1)."""
    table = _contingency(lm_labels, gt_labels)
    areas = table.sum(axis=0).astype(np.float64)
    frac = table / np.where(areas == 0, 1, areas)[None, :]
    n_per_segment = np.maximum((frac > overlap_fraction).sum(axis=1), 1)
    return float(np.mean((n_per_segment - 1) / n_per_segment))


def aiou(lm, gts, mode: str = "greedy", max_superpixels: int = 15) -> float:
    """Achievable IoU: mean over objects of the best superpixel-set IoU."""
    lm = check_label_map(lm)
    if mode not in ("greedy", "exhaustive"):
        raise ValidationError("mode must be 'greedy' or 'exhaustive'")
    if not gts:
        return 0.0
    vals = []
    for gt in gts:
        if mode == "greedy":
            vals.append(greedy_gt_set(lm, gt).iou)
        else:
            vals.append(exhaustive_gt_set(lm, gt, max_superpixels).iou)
    return float(np.mean(vals))


def avg_iou(proposals_per_image, gts_per_image) -> float:
    """Mean over GT objects of the best proposal IoU (0 with no proposals)."""
    vals = []
    for props, gts in zip(proposals_per_image, gts_per_image):
        masks = [check_mask(m) for m in props]
        for gt in gts:
            best = max((mask_iou(m, gt.mask) for m in masks), default=0.0)
            vals.append(best)
    if not vals:
        return 0.0
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# Dataset-level report
# ---------------------------------------------------------------------------


def gt_partition(gts, width: int, height: int) -> np.ndarray:
    """Combined GT label image: background 0 plus one region per object."""
    from .groundtruth import combine_objects

    return combine_objects(gts, width, height)


def best_proposal_partition(proposals, gts, width: int, height: int) -> np.ndarray:
    """Per-object best proposals painted as a partition (later object wins)."""
    out = np.zeros((height, width), dtype=np.int64)
    for region, gt in enumerate(sorted(gts, key=lambda g: g.id), start=1):
        best, best_iou = None, -1.0
        for m in proposals:
            v = mask_iou(m, gt.mask)
            if v > best_iou:
                best, best_iou = m, v
        if best is not None and best_iou > 0.0:
            out[best.bits] = region
    return out


def evaluate_dataset(
    proposals_per_image,
    gts_per_image,
    label_maps_per_image=None,
    cfg: MetricsConfig = MetricsConfig(),
    aiou_mode: str = "greedy",
) -> MetricsReport:
    """Full metric report over a dataset.

    proposals_per_image: per image a list of (BinaryMask, score).
    label_maps_per_image: per image a list of LabelMap (one per level) used
    for the achievable-IoU measure; omit to skip AIoU/efficiency.
    BR/UE/OE are computed between the best-proposal partition and the GT
    partition of each image (images without objects are skipped there).
    """
    report = MetricsReport()
    report.n_images = len(gts_per_image)
    report.n_objects = sum(len(g) for g in gts_per_image)

    report.ar, report.ar_small, report.ar_medium, report.ar_large = average_recall(
        proposals_per_image, gts_per_image, cfg
    )
    report.avg_iou = avg_iou(
        [[m for m, _ in props] for props in proposals_per_image], gts_per_image
    )

    brs, ues, oes = [], [], []
    for props, gts in zip(proposals_per_image, gts_per_image):
        if not gts:
            continue
        h, w = gts[0].mask.height, gts[0].mask.width
        gt_part = gt_partition(gts, w, h)
        pred_part = best_proposal_partition([m for m, _ in props], gts, w, h)
        brs.append(boundary_recall(pred_part, gt_part, cfg.boundary_tolerance))
        ues.append(undersegmentation_error(pred_part, gt_part))
        oes.append(oversegmentation_error(pred_part, gt_part, cfg.oe_overlap_fraction))
    report.br = float(np.mean(brs)) if brs else 0.0
    report.ue = float(np.mean(ues)) if ues else 0.0
    report.oe = float(np.mean(oes)) if oes else 0.0

    if label_maps_per_image is not None:
        per_level = []
        for lms, gts in zip(label_maps_per_image, gts_per_image):
            if not gts:
                continue
            for lm in lms:
                per_level.append(aiou(lm, gts, mode=aiou_mode))
        report.aiou = float(np.mean(per_level)) if per_level else 0.0
        report.efficiency = report.avg_iou / report.aiou if report.aiou > 0 else 0.0
    return report
