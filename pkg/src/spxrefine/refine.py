"""Turn coarse proposal windows into superpixel-precise masks.

Per proposal: upsample the 40x40 probability window to its image rectangle,
pool it into a mask prior per superpixel, concatenate the level's pooled
feature vector, classify each window-overlapping superpixel, and rasterize
the union of the object superpixels. Superpixels that do not touch the
window are background without classification; object superpixels contribute
their full extent (superpixels are atomic).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifier import MlpWeights, forward
from .errors import RefineBatchError, ValidationError
from .pooling import pool_features, pool_scalar, pooled_matrix
from .raster import BinaryMask, LabelMap, Rect
from .validation import check_features, check_label_map

WINDOW_SIZE = 40


@dataclass(frozen=True)
class CoarseProposal:
    """A 40x40 object-probability window with its image-space footprint."""

    window: np.ndarray  # (40, 40) floats in [0, 1]
    rect: Rect
    level: int
    score: float

    def __post_init__(self):
        win = np.asarray(self.window, dtype=np.float64)
        if win.shape != (WINDOW_SIZE, WINDOW_SIZE):
            raise ValidationError(f"window must be {WINDOW_SIZE}x{WINDOW_SIZE}")
        if win.min() < 0.0 or win.max() > 1.0 or not np.isfinite(win).all():
            raise ValidationError("window probabilities must be in [0, 1]")
        if self.level < 0:
            raise ValidationError("level must be >= 0")
        win.setflags(write=False)
        object.__setattr__(self, "window", win)


@dataclass(frozen=True)
class LevelBundle:
    """Shared per-level state: label map plus pooled feature matrix."""

    level: int
    label_map: LabelMap
    features: np.ndarray  # (count, D) pooled per superpixel
    dim: int

    @classmethod
    def build(cls, level: int, label_map, feature_map) -> "LevelBundle":
        lm = check_label_map(label_map)
        fm = check_features(feature_map)
        pooled = pool_features(lm, fm)
        return cls(level, lm, pooled_matrix(pooled, lm.count), fm.dim)


@dataclass(frozen=True)
class RefinedProposal:
    """Union of the superpixels classified as object."""

    superpixel_ids: tuple
    mask: BinaryMask
    score: float
    level: int
    probabilities: np.ndarray | None = None  # per superpixel id, 0 off-window


def bilinear_upsample(grid, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resample treating grid samples as cell centers.

    Target pixel center (x+.5, y+.5) maps to source coordinate
    ((x+.5)*gw/w - .5, (y+.5)*gh/h - .5), clamped at the borders; output
    values clamped to [0, 1].
    """
    grid = np.asarray(grid, dtype=np.float64)
    gh, gw = grid.shape
    u = (np.arange(out_w) + 0.5) * (gw / out_w) - 0.5
    v = (np.arange(out_h) + 0.5) * (gh / out_h) - 0.5
    u = np.clip(u, 0.0, gw - 1.0)
    v = np.clip(v, 0.0, gh - 1.0)
    u0 = np.floor(u).astype(np.int64)
    v0 = np.floor(v).astype(np.int64)
    u1 = np.minimum(u0 + 1, gw - 1)
    v1 = np.minimum(v0 + 1, gh - 1)
    fu = (u - u0)[None, :]
    fv = (v - v0)[:, None]
    top = grid[v0][:, u0] * (1.0 - fu) + grid[v0][:, u1] * fu
    bot = grid[v1][:, u0] * (1.0 - fu) + grid[v1][:, u1] * fu
    out = top * (1.0 - fv) + bot * fv
    return np.clip(out, 0.0, 1.0)


def upsample_window(cp: CoarseProposal) -> np.ndarray:
    """Bilinear upsample of the proposal window to its rect extent."""
    return bilinear_upsample(cp.window, cp.rect.w, cp.rect.h)


def refine(
    cp: CoarseProposal,
    bundle: LevelBundle,
    weights: MlpWeights,
    threshold: float = 0.5,
) -> RefinedProposal:
    """Classify window-overlapping superpixels and assemble the refined mask."""
    if cp.level != bundle.level:
        raise ValidationError(
            f"proposal level {cp.level} does not match bundle level {bundle.level}"
        )
    if 1 + bundle.dim != weights.input_dim:
        raise ValidationError(
            f"classifier expects input dim {weights.input_dim}, bundle provides {1 + bundle.dim}"
        )
    lm = bundle.label_map
    field = upsample_window(cp)
    priors = pool_scalar(lm, field, cp.rect)

    ids = np.array([pv.id for pv in priors], dtype=np.int64)
    batch = np.concatenate(
        [
            np.array([[pv.values[0]] for pv in priors]),
            bundle.features[ids],
        ],
        axis=1,
    )
    probs = forward(weights, batch)
    selected = ids[probs > threshold]

    full_probs = np.zeros(lm.count)
    full_probs[ids] = probs
    mask = BinaryMask(np.isin(lm.labels, selected))
    return RefinedProposal(
        superpixel_ids=tuple(int(s) for s in selected),
        mask=mask,
        score=cp.score,
        level=cp.level,
        probabilities=full_probs,
    )


def refine_batch(proposals, bundles, weights: MlpWeights, threshold: float = 0.5):
    """Refine proposals in order; bundles maps level -> LevelBundle.

    Per-proposal failures are collected and raised together with their
    indices after the whole batch is attempted.
    """
    results = []
    failures = []
    for idx, cp in enumerate(proposals):
        try:
            if cp.level not in bundles:
                raise ValidationError(f"no bundle for level {cp.level}")
            results.append(refine(cp, bundles[cp.level], weights, threshold))
        except ValidationError as exc:
            failures.append((idx, exc))
    if failures:
        raise RefineBatchError(failures)
    return results
