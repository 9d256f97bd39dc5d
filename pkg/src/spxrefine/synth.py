"""Seeded synthetic datasets for desk-scale end-to-end runs.

Generates textured background images with colored shapes (disks,
rectangles, wobbly blobs), one GT mask per shape, per-level feature maps
(color/position/noise channels as a stand-in for learned features), and a
coarse 40x40 probability window per object: the GT rasterized into its
padded bounding rectangle, box-downsampled, Gaussian-blurred and clamped.

Everything is deterministic per seed.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, asdict

import cv2
import numpy as np
from scipy.ndimage import gaussian_filter

from .groundtruth import GtObject, affinity_labels, affinity_to_feature_map
from .raster import (
    BinaryMask,
    FeatureMap,
    Rect,
    RgbImage,
    save_image,
    save_mask,
    write_feature_map,
)

WINDOW_SIZE = 40


@dataclass(frozen=True)
class SynthConfig:
    width: int = 160
    height: int = 160
    min_shapes: int = 1
    max_shapes: int = 3
    min_extent: int = 40      # shape diameter range, pixels
    max_extent: int = 90
    contrast: float = 0.5     # color offset between object and background
    texture: float = 0.05     # fine texture amplitude
    levels: int = 2
    feature_dim: int = 8
    pad_fraction: float = 0.25
    blur_sigma_cells: float = 1.5
    window_noise: float = 0.45  # smooth probability noise simulating a sloppy upstream net


def _smooth_noise(rng, h, w, cells, amp):
    coarse = rng.uniform(-amp, amp, size=(cells, cells))
    return cv2.resize(coarse, (w, h), interpolation=cv2.INTER_LINEAR)


def _blob_mask(rng, h, w, cx, cy, radius):
    """Star-shaped blob: radius wobbles with a few random harmonics."""
    n_harm = 4
    amps = rng.uniform(0.0, 0.12, size=n_harm)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=n_harm)
    ys, xs = np.mgrid[0:h, 0:w]
    dx = xs - cx
    dy = ys - cy
    theta = np.arctan2(dy, dx)
    limit = radius * (
        1.0 + sum(a * np.cos((k + 2) * theta + p) for k, (a, p) in enumerate(zip(amps, phases)))
    )
    return dx * dx + dy * dy <= limit * limit


def _shape_mask(rng, h, w, kind, cx, cy, extent):
    if kind == "disk":
        ys, xs = np.mgrid[0:h, 0:w]
        r = extent / 2.0
        return (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
    if kind == "rect":
        mask = np.zeros((h, w), dtype=bool)
        rw = int(extent * rng.uniform(0.6, 1.0))
        rh = int(extent * rng.uniform(0.6, 1.0))
        x0 = int(np.clip(cx - rw / 2, 0, w - 1))
        y0 = int(np.clip(cy - rh / 2, 0, h - 1))
        mask[y0 : min(y0 + rh, h), x0 : min(x0 + rw, w)] = True
        return mask
    return _blob_mask(rng, h, w, cx, cy, extent / 2.0)


def make_coarse_window(mask_bits, rect: Rect, blur_sigma_cells: float,
                       rng=None, noise: float = 0.0):
    """Box-downsample the GT crop to 40x40, blur, degrade, clamp to [0, 1].

    The optional smooth probability noise and confidence jitter imitate the
    imprecision of an upstream proposal network; a blurred-only window
    thresholds back to an almost perfect mask, which nothing downstream
    could improve on.
    """
    crop = mask_bits[rect.y : rect.y + rect.h, rect.x : rect.x + rect.w].astype(np.float64)
    win = cv2.resize(crop, (WINDOW_SIZE, WINDOW_SIZE), interpolation=cv2.INTER_AREA)
    if blur_sigma_cells > 0:
        win = gaussian_filter(win, blur_sigma_cells, mode="nearest")
    if rng is not None and noise > 0:
        gain = rng.uniform(0.85, 1.0)
        win = win * gain + _smooth_noise(rng, WINDOW_SIZE, WINDOW_SIZE, 6, noise)
    return np.clip(win, 0.0, 1.0)


def padded_bbox(mask_bits, pad_fraction, width, height) -> Rect:
    ys, xs = np.nonzero(mask_bits)
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    pad = int(round(pad_fraction * max(x1 - x0 + 1, y1 - y0 + 1)))
    x0 = max(x0 - pad, 0)
    y0 = max(y0 - pad, 0)
    x1 = min(x1 + pad, width - 1)
    y1 = min(y1 + pad, height - 1)
    return Rect(x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def _level_for_extent(extent, cfg: SynthConfig):
    if cfg.levels == 1:
        return 0
    cuts = np.geomspace(cfg.min_extent + 1, cfg.max_extent, cfg.levels + 1)[1:-1]
    return int(np.sum(extent > cuts))


def generate_image(rng, cfg: SynthConfig):
    """One synthetic scene: (RgbImage, [mask bits], [levels], [rects], [windows])."""
    h, w = cfg.height, cfg.width
    base = rng.uniform(0.25, 0.75, size=3)
    img = np.empty((h, w, 3))
    for c in range(3):
        img[:, :, c] = base[c] + _smooth_noise(rng, h, w, 5, 0.08)
    img += rng.uniform(-cfg.texture, cfg.texture, size=(h, w, 3))

    n_shapes = int(rng.integers(cfg.min_shapes, cfg.max_shapes + 1))
    masks, levels, rects, windows = [], [], [], []
    occupied = np.zeros((h, w), dtype=bool)
    kinds = ["blob", "disk", "rect"]
    for _ in range(n_shapes):
        for _attempt in range(20):
            extent = int(rng.integers(cfg.min_extent, cfg.max_extent + 1))
            margin = extent // 2 + 2
            if w - margin <= margin or h - margin <= margin:
                break
            cx = int(rng.integers(margin, w - margin))
            cy = int(rng.integers(margin, h - margin))
            kind = kinds[int(rng.integers(0, len(kinds)))]
            mask = _shape_mask(rng, h, w, kind, cx, cy, extent)
            if mask.sum() < 16 or (mask & occupied).any():
                continue
            occupied |= mask
            direction = rng.standard_normal(3)
            direction /= np.linalg.norm(direction)
            color = base + direction * cfg.contrast
            obj_tex = rng.uniform(-cfg.texture, cfg.texture, size=(h, w, 3))
            img[mask] = color[None, :] + obj_tex[mask]

            rect = padded_bbox(mask, cfg.pad_fraction, w, h)
            masks.append(mask)
            levels.append(_level_for_extent(extent, cfg))
            rects.append(rect)
            windows.append(
                make_coarse_window(mask, rect, cfg.blur_sigma_cells, rng, cfg.window_noise)
            )
            break

    image = RgbImage(np.clip(img, 0.0, 1.0))
    return image, masks, levels, rects, windows


def synth_feature_map(image: RgbImage, level: int, dim: int, rng) -> FeatureMap:
    """Stand-in learned features: smoothed color, position, smooth noise."""
    h, w = image.height, image.width
    sigma = 1.0 + level
    chans = [gaussian_filter(image.data[:, :, c], sigma, mode="nearest") for c in range(3)]
    ys, xs = np.mgrid[0:h, 0:w]
    chans.append(xs / max(w - 1, 1))
    chans.append(ys / max(h - 1, 1))
    while len(chans) < dim:
        chans.append(_smooth_noise(rng, h, w, 8, 0.5) + 0.5)
    return FeatureMap(np.stack(chans[:dim], axis=2).astype(np.float32))


def generate_dataset(out_dir, count: int, seed: int, cfg: SynthConfig = SynthConfig()):
    """Write a full synthetic dataset; returns the manifest dict."""
    rng = np.random.default_rng(seed)
    for sub in ("images", "gt", "proposals", "features", "affinity"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)

    entries = []
    for i in range(count):
        stem = f"img_{i:04d}"
        image, masks, levels, rects, windows = generate_image(rng, cfg)
        img_rel = f"images/{stem}.png"
        save_image(image, os.path.join(out_dir, img_rel))

        objects = []
        for oid, mask in enumerate(masks):
            mask_rel = f"gt/{stem}_obj{oid:02d}.png"
            save_mask(BinaryMask(mask), os.path.join(out_dir, mask_rel))
            objects.append({"id": oid, "mask_png": mask_rel})
        gt_rel = f"gt/{stem}.json"
        with open(os.path.join(out_dir, gt_rel), "w") as fh:
            json.dump({"image": img_rel, "objects": objects}, fh, indent=1)

        proposals = []
        for pid, (level, rect, window) in enumerate(zip(levels, rects, windows)):
            win_rel = f"proposals/{stem}_p{pid:02d}.fmap"
            write_feature_map(
                FeatureMap(window[:, :, None].astype(np.float32)),
                os.path.join(out_dir, win_rel),
            )
            proposals.append(
                {
                    "rect": {"x": rect.x, "y": rect.y, "w": rect.w, "h": rect.h},
                    "level": level,
                    "score": float(np.round(rng.uniform(0.5, 1.0), 6)),
                    "window_file": win_rel,
                }
            )
        prop_rel = f"proposals/{stem}.json"
        with open(os.path.join(out_dir, prop_rel), "w") as fh:
            json.dump(
                {"image": img_rel, "level_count": cfg.levels, "proposals": proposals},
                fh,
                indent=1,
            )

        feature_rels = {}
        for level in range(cfg.levels):
            feat_rel = f"features/{stem}_l{level}.fmap"
            fm = synth_feature_map(image, level, cfg.feature_dim, rng)
            write_feature_map(fm, os.path.join(out_dir, feat_rel))
            feature_rels[str(level)] = feat_rel

        # same-segment labels for adjacent pixel pairs, consumed by the
        # feature-extractor trainer
        objects = [GtObject(oid, BinaryMask(m)) for oid, m in enumerate(masks)]
        aff_rel = f"affinity/{stem}.fmap"
        write_feature_map(
            affinity_to_feature_map(affinity_labels(objects, cfg.width, cfg.height)),
            os.path.join(out_dir, aff_rel),
        )

        entries.append(
            {
                "image": img_rel,
                "gt": gt_rel,
                "proposals": prop_rel,
                "features": feature_rels,
                "affinity": aff_rel,
            }
        )

    manifest = {"seed": seed, "count": count, "config": asdict(cfg), "images": entries}
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)
    return manifest
