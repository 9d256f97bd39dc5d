"""Superpixelized ground truth.

For each annotated object the best-matching set of superpixels is found
either greedily (seed with fully-contained superpixels, add whichever
superpixel raises the IoU most, stop at a local maximum) or exhaustively
(exact subset maximization, feasible only for small instances; used as the
oracle and for the achievable-IoU measure's upper bound).

Also generates same-segment/different-segment labels for adjacent pixel
pairs from the combined object masks, consumed by the feature-extractor
trainer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .raster import BinaryMask, FeatureMap
from .validation import check_label_map, check_mask, check_same_size


@dataclass(frozen=True)
class GtObject:
    id: int
    mask: BinaryMask
    category: str | None = None

    def __post_init__(self):
        if self.mask.area == 0:
            raise ValidationError("ground-truth mask must be non-empty")


@dataclass(frozen=True)
class SpxSelection:
    ids: tuple
    iou: float


def _overlap_counts(lm, gt_mask):
    """Per-superpixel (pixels inside gt, total pixels)."""
    flat = lm.labels.ravel()
    count = lm.count
    inside = np.bincount(flat, weights=gt_mask.bits.ravel().astype(np.float64), minlength=count)
    areas = np.bincount(flat, minlength=count)
    return inside.astype(np.int64), areas


def greedy_gt_set(lm, gt: GtObject) -> SpxSelection:
    """Greedy maximum-IoU superpixel set for one object.

    Seed: every superpixel fully inside the mask. If the seed is empty the
    single best-IoU superpixel starts the set. Each step adds the superpixel
    (any one intersecting the mask) with the largest IoU gain, ties broken
    by lowest id; stops when no addition increases the IoU.
    """
    lm = check_label_map(lm)
    check_same_size(lm, gt.mask, "label map and gt mask")
    inside, areas = _overlap_counts(lm, gt.mask)
    gt_area = gt.mask.area
    outside = areas - inside

    candidates = np.nonzero(inside > 0)[0]
    selected = [int(s) for s in candidates if outside[s] == 0]
    inter = int(inside[selected].sum())
    union = gt_area + int(outside[selected].sum())
    remaining = [int(s) for s in candidates if outside[s] > 0]

    if not selected:
        # empty seed: start from the single superpixel with the best IoU
        best_s, best_iou = None, -1.0
        for s in remaining:
            iou = inside[s] / (gt_area + outside[s])
            if iou > best_iou:
                best_s, best_iou = s, iou
        if best_s is None:
            return SpxSelection((), 0.0)
        selected = [best_s]
        inter = int(inside[best_s])
        union = gt_area + int(outside[best_s])
        remaining.remove(best_s)

    current = inter / union
    while remaining:
        gains = [(inter + inside[s]) / (union + outside[s]) for s in remaining]
        best_idx = int(np.argmax(gains))  # argmax returns first max: lowest id wins
        if gains[best_idx] <= current:
            break
        s = remaining.pop(best_idx)
        selected.append(s)
        inter += int(inside[s])
        union += int(outside[s])
        current = inter / union
    return SpxSelection(tuple(sorted(selected)), current)


def exhaustive_gt_set(lm, gt: GtObject, max_superpixels: int = 15) -> SpxSelection:
    """Exact maximum-IoU subset over all superpixels intersecting the mask.

    Superpixels disjoint from the mask only enlarge the union, so they are
    never part of an optimum. Instances with more than max_superpixels
    intersecting superpixels are rejected.
    """
    lm = check_label_map(lm)
    check_same_size(lm, gt.mask, "label map and gt mask")
    inside, areas = _overlap_counts(lm, gt.mask)
    candidates = np.nonzero(inside > 0)[0]
    k = len(candidates)
    if k > max_superpixels:
        raise ValidationError(
            f"instance too large: {k} intersecting superpixels > {max_superpixels}"
        )
    if k == 0:
        return SpxSelection((), 0.0)
    gt_area = gt.mask.area
    ins = inside[candidates].astype(np.float64)
    outs = (areas - inside)[candidates].astype(np.float64)

    subsets = np.arange(1 << k, dtype=np.uint32)
    members = (subsets[:, None] >> np.arange(k)[None, :]) & 1  # (2^k, k)
    inter = members @ ins
    union = gt_area + members @ outs
    ious = inter / union
    best = int(np.argmax(ious))  # first max: smallest bitmask on ties
    ids = tuple(int(candidates[b]) for b in range(k) if (best >> b) & 1)
    return SpxSelection(ids, float(ious[best]))


@dataclass(frozen=True)
class AffinityLabels:
    """Same-segment labels for adjacent pixel pairs (True = same)."""

    horizontal: np.ndarray        # (H, W-1)
    vertical: np.ndarray          # (H-1, W)
    diagonal: np.ndarray | None = None       # (H-1, W-1), down-right
    antidiagonal: np.ndarray | None = None   # (H-1, W-1), down-left


def combine_objects(objects, width: int, height: int) -> np.ndarray:
    """Background 0 plus one region per object; later ids win overlaps."""
    combined = np.zeros((height, width), dtype=np.int64)
    for obj in sorted(objects, key=lambda o: o.id):
        m = check_mask(obj.mask)
        if m.bits.shape != (height, width):
            raise ValidationError("object mask dimensions differ from the image")
        combined[m.bits] = obj.id + 1
    return combined


def affinity_labels(objects, width: int, height: int, connectivity: int = 4) -> AffinityLabels:
    """Pairwise same-segment labels from the combined object masks."""
    if connectivity not in (4, 8):
        raise ValidationError("connectivity must be 4 or 8")
    combined = combine_objects(objects, width, height)
    horizontal = combined[:, :-1] == combined[:, 1:]
    vertical = combined[:-1, :] == combined[1:, :]
    if connectivity == 4:
        return AffinityLabels(horizontal, vertical)
    diag = combined[:-1, :-1] == combined[1:, 1:]
    anti = combined[:-1, 1:] == combined[1:, :-1]
    return AffinityLabels(horizontal, vertical, diag, anti)


def affinity_to_feature_map(labels: AffinityLabels) -> FeatureMap:
    """Pack 4-connectivity affinity labels into an (H, W, 2) feature map.

    Channel 0 holds the label for the pair (r, c)-(r, c+1); channel 1 for
    (r, c)-(r+1, c). The last column/row have no pair and are padded with 1.
    """
    h = labels.vertical.shape[0] + 1
    w = labels.horizontal.shape[1] + 1
    data = np.ones((h, w, 2), dtype=np.float32)
    data[:, :-1, 0] = labels.horizontal
    data[:-1, :, 1] = labels.vertical
    return FeatureMap(data)
