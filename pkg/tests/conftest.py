"""Shared fixtures and the independent brute-force segmentation oracle."""

import math

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter


def quantized_image(rng, h, w, levels=8):
    """Random image with channels on a power-of-two grid, so equal edge
    weights actually occur and both implementations compute bit-identical
    weights (all intermediate sums are exact in binary)."""
    return rng.integers(0, levels + 1, size=(h, w, 3)) / levels


def quantized_features(rng, h, w, d, levels=8):
    vals = rng.integers(-levels, levels + 1, size=(h, w, d)) / levels
    # avoid all-zero vectors: force the first channel away from zero
    vals[:, :, 0] = rng.integers(1, levels + 1, size=(h, w)) / levels
    return vals.astype(np.float32)


def reference_segment(img, features, k, alpha, min_size, connectivity, sigma=0.0):
    """Naive reimplementation of the merge rule, used as the oracle.

    Same rule, independent code: explicit edge enumeration, python sort with
    the (weight, i, j) tie-break, dict-based union-find, two passes
    (threshold merge, then min-size absorption), row-major relabeling.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w, _ = img.shape
    if sigma > 0:
        img = np.stack(
            [np.clip(gaussian_filter(img[:, :, c], sigma, mode="nearest"), 0, 1) for c in range(3)],
            axis=2,
        )
    feats = None
    if features is not None and alpha > 0:
        feats = np.asarray(features, dtype=np.float64)

    def weight(r0, c0, r1, c1):
        diff = img[r0, c0] - img[r1, c1]
        wc = np.sqrt(np.dot(diff, diff)) / np.sqrt(3.0)
        if feats is None:
            return wc
        fi, fj = feats[r0, c0], feats[r1, c1]
        ni, nj = np.sqrt(np.dot(fi, fi)), np.sqrt(np.dot(fj, fj))
        if ni == 0.0 or nj == 0.0:
            dcos = 0.5
        else:
            dcos = float(np.arccos(np.clip(np.dot(fi, fj) / (ni * nj), -1.0, 1.0))) / math.pi
        return (1.0 - alpha) * wc + alpha * dcos

    offsets = [(0, 1), (1, 0)]
    if connectivity == 8:
        offsets += [(1, 1), (1, -1)]
    edges = []
    for r in range(h):
        for c in range(w):
            for dr, dc in offsets:
                r1, c1 = r + dr, c + dc
                if 0 <= r1 < h and 0 <= c1 < w:
                    a = r * w + c
                    b = r1 * w + c1
                    i, j = min(a, b), max(a, b)
                    edges.append((weight(r, c, r1, c1), i, j))
    edges.sort()

    parent = {p: p for p in range(h * w)}
    size = {p: 1 for p in range(h * w)}
    internal = {p: 0.0 for p in range(h * w)}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for wt, i, j in edges:
        a, b = find(i), find(j)
        if a == b:
            continue
        if wt <= min(internal[a] + k / size[a], internal[b] + k / size[b]):
            parent[b] = a
            size[a] += size[b]
            internal[a] = wt

    for wt, i, j in edges:
        a, b = find(i), find(j)
        if a != b and (size[a] < min_size or size[b] < min_size):
            parent[b] = a
            size[a] += size[b]

    labels = np.empty(h * w, dtype=np.int64)
    remap = {}
    for p in range(h * w):
        root = find(p)
        if root not in remap:
            remap[root] = len(remap)
        labels[p] = remap[root]
    return labels.reshape(h, w)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
