"""Three-step proposal post-processing.

1. Bilateral filtering on the superpixel adjacency graph: each superpixel's
   object probability is re-estimated as a Gaussian-weighted mean over
   itself and its neighbors, weighted jointly by centroid distance and
   mean-color distance, then re-thresholded.
2. Morphological opening then closing to remove/fill tiny mask artifacts.
3. Greedy non-maximum suppression of near-duplicate masks (suppress when
   IoU >= threshold, so exact duplicates always go).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_closing, binary_opening

from .errors import ValidationError
from .pooling import SuperpixelStats
from .raster import BinaryMask, mask_iou
from .refine import RefinedProposal


@dataclass(frozen=True)
class PostprocessConfig:
    spatial_sigma: float = 30.0   # centroid distance scale, pixels
    color_sigma: float = 0.1      # mean-color distance scale
    filter_threshold: float = 0.5
    radius: int = 2               # structuring element radius
    nms_iou: float = 0.95

    def __post_init__(self):
        if self.spatial_sigma <= 0 or self.color_sigma <= 0:
            raise ValidationError("sigmas must be positive")
        if not (0.0 < self.filter_threshold < 1.0):
            raise ValidationError("filter_threshold must be in (0, 1)")
        if self.radius < 0:
            raise ValidationError("radius must be >= 0")
        if not (0.0 < self.nms_iou <= 1.0):
            raise ValidationError("nms_iou must be in (0, 1]")


def spx_bilateral_filter(probs, stats: SuperpixelStats, cfg: PostprocessConfig) -> np.ndarray:
    """Adjacency-graph bilateral filter over per-superpixel probabilities.

    output(s) = sum_n w(s,n) p(n) / sum_n w(s,n) over n in {s} + neighbors(s),
    w = exp(-|centroid_s - centroid_n|^2 / 2*spatial_sigma^2)
      * exp(-|color_s - color_n|^2 / 2*color_sigma^2).
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.min() < 0.0 or probs.max() > 1.0:
        raise ValidationError("probabilities must be in [0, 1]")
    count = stats.count
    num = probs.copy()  # self-weight is exactly 1
    den = np.ones(count)
    if stats.adjacency:
        pairs = np.array(sorted(stats.adjacency), dtype=np.int64)
        a, b = pairs[:, 0], pairs[:, 1]
        d2 = np.sum((stats.centroids[a] - stats.centroids[b]) ** 2, axis=1)
        c2 = np.sum((stats.mean_colors[a] - stats.mean_colors[b]) ** 2, axis=1)
        w = np.exp(-d2 / (2.0 * cfg.spatial_sigma**2)) * np.exp(
            -c2 / (2.0 * cfg.color_sigma**2)
        )
        np.add.at(num, a, w * probs[b])
        np.add.at(num, b, w * probs[a])
        np.add.at(den, a, w)
        np.add.at(den, b, w)
    return num / den


def _box(radius: int) -> np.ndarray:
    # Chebyshev ball: keeps right-angle shapes intact under opening/closing,
    # while still erasing sub-(2r+1)-thick protrusions and holes.
    return np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)


def open_close(mask: BinaryMask, radius: int) -> BinaryMask:
    """Morphological opening then closing; radius 0 is the identity.

    The closing runs on a radius-padded canvas so frame borders behave like
    open background (both stages are then exactly idempotent).
    """
    if radius == 0:
        return mask
    structure = _box(radius)
    opened = binary_opening(mask.bits, structure=structure)
    padded = np.pad(opened, radius, constant_values=False)
    closed = binary_closing(padded, structure=structure)
    return BinaryMask(closed[radius:-radius, radius:-radius])


def filter_proposal(
    rp: RefinedProposal, stats: SuperpixelStats, label_map, cfg: PostprocessConfig
) -> RefinedProposal:
    """Bilateral-filter a proposal's probabilities, re-threshold, re-rasterize."""
    from .validation import check_label_map

    if rp.probabilities is None:
        raise ValidationError("proposal carries no per-superpixel probabilities")
    lm = check_label_map(label_map)
    filtered = spx_bilateral_filter(rp.probabilities, stats, cfg)
    selected = np.nonzero(filtered > cfg.filter_threshold)[0]
    mask = BinaryMask(np.isin(lm.labels, selected))
    return RefinedProposal(
        superpixel_ids=tuple(int(s) for s in selected),
        mask=mask,
        score=rp.score,
        level=rp.level,
        probabilities=filtered,
    )


def nms(proposals, iou_threshold: float):
    """Greedy duplicate removal; keeps a proposal iff IoU < threshold with
    every higher-scored kept mask. Returns survivors in descending score
    order (ties stable by input index)."""
    if not proposals:
        return []
    scores = np.array([p.score for p in proposals])
    order = np.argsort(-scores, kind="stable")
    kept = []
    for idx in order:
        cand = proposals[idx]
        if all(mask_iou(cand.mask, k.mask) < iou_threshold for k in kept):
            kept.append(cand)
    return kept
