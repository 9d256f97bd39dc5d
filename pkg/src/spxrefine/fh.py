"""Graph-based superpixel segmentation with pluggable edge distances.

Adjacent pixels are greedily merged over a weight-sorted edge list; two
components join when the connecting edge weight does not exceed either
component's internal difference plus k/|component|. Edge weights blend a
normalized color distance with the cosine distance between per-pixel
feature vectors:

    w = (1 - alpha) * ||p_i - p_j||_2 / sqrt(3) + alpha * acos(cos_sim) / pi

Both terms lie in [0, 1], so alpha only balances their influence. With no
feature map (or alpha = 0) the weights reduce to the plain color distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit
from scipy.ndimage import gaussian_filter
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ValidationError
from .raster import FeatureMap, LabelMap, RgbImage
from .validation import check_features, check_image, check_same_size

SQRT3 = math.sqrt(3.0)

# Pairs with a zero-length feature vector get the neutral distance 0.5; this
# counter tracks how often that fallback fired (diagnostic only).
_zero_feature_pairs = 0


def zero_feature_pairs() -> int:
    return _zero_feature_pairs


def reset_zero_feature_pairs() -> None:
    global _zero_feature_pairs
    _zero_feature_pairs = 0


@dataclass(frozen=True)
class FhParams:
    """Merge parameters.

    k            merge-threshold scale; larger k merges more (fewer superpixels)
    alpha        blend weight of the feature distance, in [0, 1]
    min_size     minimum superpixel area, enforced by a second merge pass
    connectivity 4 or 8 lattice neighbors
    sigma        Gaussian pre-smoothing of the color channels (never features)
    """

    k: float = 1.0
    alpha: float = 0.2
    min_size: int = 20
    connectivity: int = 8
    sigma: float = 0.8

    def __post_init__(self):
        if self.k <= 0:
            raise ValidationError("k must be positive")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValidationError("alpha must be in [0, 1]")
        if self.min_size < 0:
            raise ValidationError("min_size must be non-negative")
        if self.connectivity not in (4, 8):
            raise ValidationError("connectivity must be 4 or 8")
        if self.sigma < 0:
            raise ValidationError("sigma must be non-negative")


@dataclass(frozen=True)
class EdgeList:
    """Lattice edges (i < j) sorted by (weight, i, j)."""

    i: np.ndarray
    j: np.ndarray
    w: np.ndarray

    def __len__(self) -> int:
        return len(self.w)


# ---------------------------------------------------------------------------
# Pairwise distances
# ---------------------------------------------------------------------------


def delta_fh(p_i, p_j) -> float:
    """Euclidean color distance scaled by sqrt(3) so [0,1]^3 maps to [0, 1]."""
    p_i = np.asarray(p_i, dtype=np.float64)
    p_j = np.asarray(p_j, dtype=np.float64)
    return float(np.linalg.norm(p_i - p_j) / SQRT3)

def delta_cos(f_i, f_j) -> float:
    """Angular distance acos(cosine similarity) / pi, in [0, 1].

    A zero vector has no direction; the pair gets the neutral value 0.5 and
    the diagnostic counter is incremented.
    """
    global _zero_feature_pairs
    f_i = np.asarray(f_i, dtype=np.float64)
    f_j = np.asarray(f_j, dtype=np.float64)
    if f_i.shape != f_j.shape:
        raise ValidationError("feature vectors differ in dimension")
    ni = np.linalg.norm(f_i)
    nj = np.linalg.norm(f_j)
    if ni == 0.0 or nj == 0.0:
        _zero_feature_pairs += 1
        return 0.5
    c = float(np.clip(np.dot(f_i, f_j) / (ni * nj), -1.0, 1.0))
    return math.acos(c) / math.pi


def delta_blended(p_i, p_j, f_i, f_j, alpha: float) -> float:
    """Blend of color and feature distance: (1-a)*delta_fh + a*delta_cos."""
    return (1.0 - alpha) * delta_fh(p_i, p_j) + alpha * delta_cos(f_i, f_j)


def _pair_weights(img, feats, ia, ja, alpha):
    """Vectorized blended distance for pixel-index arrays ia, ja."""
    global _zero_feature_pairs
    flat = img.reshape(-1, 3)
    diff = flat[ia] - flat[ja]
    w = np.sqrt(np.einsum("ij,ij->i", diff, diff)) / SQRT3
    if feats is not None and alpha > 0.0:
        f = feats.reshape(feats.shape[0] * feats.shape[1], -1).astype(np.float64)
        norms = np.linalg.norm(f, axis=1)
        dots = np.einsum("ij,ij->i", f[ia], f[ja])
        denom = norms[ia] * norms[ja]
        zero = denom == 0.0
        _zero_feature_pairs += int(zero.sum())
        cos = np.where(zero, 0.0, dots / np.where(zero, 1.0, denom))
        dcos = np.arccos(np.clip(cos, -1.0, 1.0)) / math.pi
        dcos[zero] = 0.5
        w = (1.0 - alpha) * w + alpha * dcos
    return w


def build_edges(img, features=None, params: FhParams = FhParams()) -> EdgeList:
    """One weighted edge per neighbor pair, sorted by (weight, i, j).

    Color channels are pre-smoothed with a Gaussian of params.sigma (feature
    maps are used as-is). Requires matching image/feature dimensions.
    """
    img = check_image(img)
    feats = None
    if features is not None:
        fm = check_features(features)
        check_same_size(img, fm, "image and feature map")
        feats = fm.data
    h, w = img.height, img.width
    data = img.data
    if params.sigma > 0.0:
        data = np.stack(
            [gaussian_filter(data[:, :, c], params.sigma, mode="nearest") for c in range(3)],
            axis=2,
        )
        data = np.clip(data, 0.0, 1.0)

    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)
    pairs = [
        (idx[:, :-1].ravel(), idx[:, 1:].ravel()),   # right
        (idx[:-1, :].ravel(), idx[1:, :].ravel()),   # down
    ]
    if params.connectivity == 8:
        pairs.append((idx[:-1, :-1].ravel(), idx[1:, 1:].ravel()))  # down-right
        pairs.append((idx[:-1, 1:].ravel(), idx[1:, :-1].ravel()))  # down-left
    ia = np.concatenate([p[0] for p in pairs])
    ja = np.concatenate([p[1] for p in pairs])
    lo = np.minimum(ia, ja)
    hi = np.maximum(ia, ja)
    wts = _pair_weights(data, feats, lo, hi, params.alpha if feats is not None else 0.0)
    order = np.lexsort((hi, lo, wts))
    return EdgeList(i=lo[order], j=hi[order], w=wts[order])


# ---------------------------------------------------------------------------
# Union-find merge pass (sequential by definition; jitted for speed)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:  # path compression
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def _merge_pass(n, ei, ej, ew, k, min_size):
    parent = np.arange(n, dtype=np.int64)
    size = np.ones(n, dtype=np.int64)
    internal = np.zeros(n, dtype=np.float64)

    for e in range(len(ew)):
        a = _find(parent, ei[e])
        b = _find(parent, ej[e])
        if a == b:
            continue
        w = ew[e]
        if w <= min(internal[a] + k / size[a], internal[b] + k / size[b]):
            parent[b] = a
            size[a] += size[b]
            internal[a] = w

    if min_size > 1:
        # edges are weight-sorted, so a small component is absorbed through
        # its lowest-weight boundary edge
        for e in range(len(ew)):
            a = _find(parent, ei[e])
            b = _find(parent, ej[e])
            if a != b and (size[a] < min_size or size[b] < min_size):
                parent[b] = a
                size[a] += size[b]

    # dense ids in row-major first-occurrence order
    labels = np.empty(n, dtype=np.int64)
    remap = np.full(n, -1, dtype=np.int64)
    nxt = 0
    for p in range(n):
        r = _find(parent, p)
        if remap[r] < 0:
            remap[r] = nxt
            nxt += 1
        labels[p] = remap[r]
    return labels


def segment(img, features=None, params: FhParams = FhParams()) -> LabelMap:
    """Segment an image into superpixels; deterministic for fixed inputs."""
    img = check_image(img)
    edges = build_edges(img, features, params)
    n = img.height * img.width
    labels = _merge_pass(n, edges.i, edges.j, edges.w, float(params.k), int(params.min_size))
    return LabelMap(labels.reshape(img.height, img.width))


# ---------------------------------------------------------------------------
# Calibration: search k for a target mean superpixel count
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationResult:
    params: FhParams
    mean_count: float
    warning: bool  # target not reached within tolerance/bounds
    iterations: int


def _mean_count(pairs, params):
    return float(np.mean([segment(img, fm, params).count for img, fm in pairs]))


def calibrate(
    images,
    target_count: int,
    template: FhParams = FhParams(),
    k_bounds=(1e-4, 10.0),
    max_iter: int = 20,
    rel_tol: float = 0.1,
) -> CalibrationResult:
    """Binary-search k so the mean superpixel count hits target_count.

    `images` is a sequence of RgbImage or (RgbImage, FeatureMap) pairs. The
    count decreases monotonically in k, so bisection (in log-k, since k is a
    scale) converges; stops within +-rel_tol of the target or after max_iter
    evaluations. If the target is unreachable inside k_bounds the best k
    found is returned with warning=True.
    """
    pairs = []
    for item in images:
        if isinstance(item, tuple):
            pairs.append((item[0], item[1]))
        else:
            pairs.append((item, None))
    if not pairs:
        raise ValidationError("calibration needs at least one image")
    if target_count < 1:
        raise ValidationError("target_count must be >= 1")

    lo, hi = float(k_bounds[0]), float(k_bounds[1])
    best_k, best_count, best_err = None, None, math.inf
    iterations = 0
    for _ in range(max_iter):
        k = math.sqrt(lo * hi)
        count = _mean_count(pairs, replace(template, k=k))
        iterations += 1
        err = abs(count - target_count)
        if err < best_err:
            best_k, best_count, best_err = k, count, err
        if err <= rel_tol * target_count:
            return CalibrationResult(replace(template, k=k), count, False, iterations)
        if count > target_count:
            lo = k  # too many superpixels: merge more
        else:
            hi = k
    return CalibrationResult(replace(template, k=best_k), best_count, True, iterations)


# ---------------------------------------------------------------------------
# Estimator wrapper
# ---------------------------------------------------------------------------


class FhSegmenter(BaseEstimator, TransformerMixin):
    """Superpixel segmenter with the fit/transform API.

    fit() calibrates the merge threshold k to `target_count` superpixels on
    the given images (skipped when target_count is None); transform() maps
    images to label maps. Inputs are RgbImage or (RgbImage, FeatureMap)
    pairs, or plain (H, W, 3) / (H, W, D) arrays.
    """

    def __init__(
        self,
        k=1.0,
        alpha=0.2,
        min_size=20,
        connectivity=8,
        sigma=0.8,
        target_count=None,
        k_bounds=(1e-4, 10.0),
        max_iter=20,
        count_tol=0.1,
    ):
        self.k = k
        self.alpha = alpha
        self.min_size = min_size
        self.connectivity = connectivity
        self.sigma = sigma
        self.target_count = target_count
        self.k_bounds = k_bounds
        self.max_iter = max_iter
        self.count_tol = count_tol

    def _template(self, k=None):
        return FhParams(
            k=self.k if k is None else k,
            alpha=self.alpha,
            min_size=self.min_size,
            connectivity=self.connectivity,
            sigma=self.sigma,
        )

    def fit(self, X, y=None):
        if self.target_count is None:
            self.k_ = float(self.k)
            self.calibration_ = None
            return self
        result = calibrate(
            [self._coerce(x) for x in X],
            self.target_count,
            self._template(),
            k_bounds=self.k_bounds,
            max_iter=self.max_iter,
            rel_tol=self.count_tol,
        )
        self.k_ = result.params.k
        self.calibration_ = result
        return self

    def transform(self, X):
        return [self.segment_one(*self._coerce(x)) for x in X]

    def segment_one(self, image, features=None) -> LabelMap:
        k = getattr(self, "k_", self.k)
        return segment(image, features, self._template(k))

    @staticmethod
    def _coerce(x):
        if isinstance(x, tuple):
            return x[0], x[1]
        return x, None
