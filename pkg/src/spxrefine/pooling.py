"""Superpixel statistics and the superpixel pooling operator.

Pooling reduces a per-pixel field to one value (or vector) per superpixel by
arithmetic mean. Mask priors are pooled over the window/superpixel
intersection only; feature vectors are pooled over the full superpixel
extent once per (label map, feature map) pair and shared across proposals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .raster import Rect
from .validation import check_features, check_image, check_label_map, check_same_size


@dataclass(frozen=True)
class SuperpixelStats:
    """Exact per-superpixel aggregates of a label map over an image."""

    areas: np.ndarray        # (count,) pixels
    mean_colors: np.ndarray  # (count, 3) in [0, 1]
    bboxes: np.ndarray       # (count, 4) as x, y, w, h
    centroids: np.ndarray    # (count, 2) as x, y in pixels
    adjacency: frozenset     # of (low_id, high_id) pairs

    @property
    def count(self) -> int:
        return len(self.areas)

    def neighbors(self, s: int) -> list:
        out = [b for a, b in self.adjacency if a == s]
        out += [a for a, b in self.adjacency if b == s]
        return sorted(out)

    def bbox(self, s: int) -> Rect:
        x, y, w, h = self.bboxes[s]
        return Rect(int(x), int(y), int(w), int(h))


@dataclass(frozen=True)
class PooledVector:
    """Mean of a field over (part of) one superpixel."""

    id: int
    values: np.ndarray  # length 1 for a mask prior, D for pooled features
    support: int        # pixels pooled

    def __post_init__(self):
        if self.support < 1:
            raise ValidationError("pooled support must be >= 1")


def compute_stats(lm, img) -> SuperpixelStats:
    """Areas, mean colors, bounding boxes, centroids, 4-connected adjacency."""
    lm = check_label_map(lm)
    img = check_image(img)
    check_same_size(lm, img, "label map and image")
    labels = lm.labels
    count = lm.count
    flat = labels.ravel()

    areas = np.bincount(flat, minlength=count)
    colors = np.stack(
        [np.bincount(flat, weights=img.data[:, :, c].ravel(), minlength=count) for c in range(3)],
        axis=1,
    ) / areas[:, None]

    ys, xs = np.mgrid[0 : lm.height, 0 : lm.width]
    xs = xs.ravel().astype(np.float64)
    ys = ys.ravel().astype(np.float64)
    cx = np.bincount(flat, weights=xs, minlength=count) / areas
    cy = np.bincount(flat, weights=ys, minlength=count) / areas
    centroids = np.stack([cx, cy], axis=1)

    bboxes = np.zeros((count, 4), dtype=np.int64)
    x0 = np.full(count, lm.width, dtype=np.int64)
    y0 = np.full(count, lm.height, dtype=np.int64)
    x1 = np.zeros(count, dtype=np.int64)
    y1 = np.zeros(count, dtype=np.int64)
    np.minimum.at(x0, flat, xs.astype(np.int64))
    np.minimum.at(y0, flat, ys.astype(np.int64))
    np.maximum.at(x1, flat, xs.astype(np.int64))
    np.maximum.at(y1, flat, ys.astype(np.int64))
    bboxes[:, 0] = x0
    bboxes[:, 1] = y0
    bboxes[:, 2] = x1 - x0 + 1
    bboxes[:, 3] = y1 - y0 + 1

    pairs = set()
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        diff = a != b
        lo = np.minimum(a[diff], b[diff])
        hi = np.maximum(a[diff], b[diff])
        pairs.update(zip(lo.tolist(), hi.tolist()))

    return SuperpixelStats(
        areas=areas,
        mean_colors=colors,
        bboxes=bboxes,
        centroids=centroids,
        adjacency=frozenset(pairs),
    )


def pool_scalar(lm, field, window: Rect) -> list[PooledVector]:
    """Mean of `field` per superpixel over the window/image intersection.

    `field` is defined on the window (shape window.h x window.w); superpixels
    that do not intersect the window are absent from the result.
    """
    lm = check_label_map(lm)
    field = np.asarray(field, dtype=np.float64)
    if field.shape != (window.h, window.w):
        raise ValidationError(
            f"field shape {field.shape} does not match window {window.h}x{window.w}"
        )
    clipped = window.clip(lm.width, lm.height)
    sub_labels = lm.labels[clipped.y : clipped.y + clipped.h, clipped.x : clipped.x + clipped.w]
    fy = clipped.y - window.y
    fx = clipped.x - window.x
    sub_field = field[fy : fy + clipped.h, fx : fx + clipped.w]

    count = lm.count
    support = np.bincount(sub_labels.ravel(), minlength=count)
    sums = np.bincount(sub_labels.ravel(), weights=sub_field.ravel(), minlength=count)
    out = []
    for s in np.nonzero(support)[0]:
        out.append(
            PooledVector(int(s), np.array([sums[s] / support[s]]), int(support[s]))
        )
    return out


def pool_features(lm, fm) -> list[PooledVector]:
    """Channel-wise mean feature vector per superpixel (full extent).

    Computed once per (label map, feature map) pair; the result is immutable
    and shareable across all proposals of the level.
    """
    lm = check_label_map(lm)
    fm = check_features(fm)
    check_same_size(lm, fm, "label map and feature map")
    flat = lm.labels.ravel()
    count = lm.count
    areas = np.bincount(flat, minlength=count)
    acc = np.zeros((count, fm.dim), dtype=np.float64)
    np.add.at(acc, flat, fm.data.reshape(-1, fm.dim).astype(np.float64))
    means = acc / areas[:, None]
    return [PooledVector(int(s), means[s].copy(), int(areas[s])) for s in range(count)]


def pooled_matrix(pooled: list[PooledVector], count: int) -> np.ndarray:
    """Stack pooled vectors into a (count, D) matrix (ids must cover 0..count-1)."""
    if len(pooled) != count:
        raise ValidationError("pooled vectors must cover every superpixel id")
    dim = len(pooled[0].values)
    mat = np.zeros((count, dim), dtype=np.float64)
    for pv in pooled:
        mat[pv.id] = pv.values
    return mat
