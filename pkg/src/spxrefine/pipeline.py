"""End-to-end plumbing shared by the CLI commands: per-level segmentation,
bundle construction, training-sample generation, refinement with
post-processing, and dataset evaluation."""

from __future__ import annotations

import json
import os

import numpy as np

from .classifier import MlpWeights, SpxSample, TrainConfig, train
from .config import RunConfig
from .errors import ValidationError
from .fh import segment
from .groundtruth import greedy_gt_set
from .manifests import load_gt_manifest, load_proposals_manifest, load_refined, save_refined
from .metrics import MetricsReport, evaluate_dataset
from .pooling import compute_stats, pool_scalar
from .postprocess import filter_proposal, nms, open_close
from .raster import (
    BinaryMask,
    LabelMap,
    load_image,
    read_feature_map,
    read_label_map,
    write_label_map,
)
from .refine import CoarseProposal, LevelBundle, RefinedProposal, refine_batch, upsample_window


def stem_of(image_rel: str) -> str:
    return os.path.splitext(os.path.basename(image_rel))[0]


def resolve_features(root, level_cfg, stem, required: bool):
    rel = level_cfg.feature_path(stem)
    path = os.path.join(root, rel) if rel else None
    if path is None or not os.path.exists(path):
        if required:
            raise ValidationError(
                f"level {level_cfg.index}: alpha={level_cfg.fh.alpha} needs a feature map "
                f"but none found for '{stem}'"
            )
        return None
    return read_feature_map(path)


def segment_image_levels(image, cfg: RunConfig, root, stem, labels_dir=None):
    """Label map per level: loaded from labels_dir when present, else computed."""
    out = {}
    for lv in cfg.levels:
        if labels_dir is not None:
            spxl = os.path.join(labels_dir, f"{stem}_l{lv.index}.spxl")
            if os.path.exists(spxl):
                out[lv.index] = read_label_map(spxl)
                continue
        features = resolve_features(root, lv, stem, required=lv.fh.alpha > 0.0)
        out[lv.index] = segment(image, features, lv.fh)
    return out


def build_bundles(cfg: RunConfig, root, stem, label_maps):
    bundles = {}
    for lv in cfg.levels:
        features = resolve_features(root, lv, stem, required=True)
        bundles[lv.index] = LevelBundle.build(lv.index, label_maps[lv.index], features)
    return bundles


def coarse_mask(cp: CoarseProposal, width: int, height: int, threshold: float = 0.5) -> BinaryMask:
    """Rasterize a coarse proposal: upsampled window thresholded into place."""
    field = upsample_window(cp)
    clipped = cp.rect.clip(width, height)
    bits = np.zeros((height, width), dtype=bool)
    fy, fx = clipped.y - cp.rect.y, clipped.x - cp.rect.x
    bits[clipped.y : clipped.y + clipped.h, clipped.x : clipped.x + clipped.w] = (
        field[fy : fy + clipped.h, fx : fx + clipped.w] > threshold
    )
    return BinaryMask(bits)


def _match_gt(cp: CoarseProposal, gts, width, height):
    """Best-IoU GT for a coarse proposal; None below 0.1."""
    from .raster import mask_iou

    cm = coarse_mask(cp, width, height)
    best, best_iou = None, 0.1
    for gt in gts:
        v = mask_iou(cm, gt.mask)
        if v > best_iou:
            best, best_iou = gt, v
    return best


def build_training_samples(root, manifest, cfg: RunConfig, rng, labels_dir=None):
    """Positive samples from the greedy optimal superpixel set per object;
    the remaining window-overlapping superpixels form the negative pool,
    subsampled to cfg.train.neg_ratio negatives per positive."""
    samples = []
    for entry in manifest["images"]:
        stem = stem_of(entry["image"])
        image = load_image(os.path.join(root, entry["image"]))
        gts = load_gt_manifest(root, entry["gt"])
        proposals = load_proposals_manifest(root, entry["proposals"])
        if not gts or not proposals:
            continue
        label_maps = segment_image_levels(image, cfg, root, stem, labels_dir)
        bundles = build_bundles(cfg, root, stem, label_maps)
        greedy_cache = {}
        for cp in proposals:
            gt = _match_gt(cp, gts, image.width, image.height)
            if gt is None:
                continue
            bundle = bundles[cp.level]
            lm = bundle.label_map
            key = (cp.level, gt.id)
            if key not in greedy_cache:
                greedy_cache[key] = set(greedy_gt_set(lm, gt).ids)
            positive_ids = greedy_cache[key]

            field = upsample_window(cp)
            priors = pool_scalar(lm, field, cp.rect)
            pos, neg = [], []
            for pv in priors:
                vec = np.concatenate([[pv.values[0]], bundle.features[pv.id]])
                (pos if pv.id in positive_ids else neg).append(vec)
            if not pos:
                continue
            keep = min(len(neg), cfg.train.neg_ratio * len(pos))
            if keep < len(neg):
                idx = rng.choice(len(neg), size=keep, replace=False)
                neg = [neg[i] for i in sorted(idx)]
            samples += [SpxSample(v, True) for v in pos]
            samples += [SpxSample(v, False) for v in neg]
    return samples


def train_from_manifest(root, manifest, cfg: RunConfig, seed=None, labels_dir=None):
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    samples = build_training_samples(root, manifest, cfg, rng, labels_dir)
    if not samples:
        raise ValidationError("no training samples could be built")
    tcfg = TrainConfig(
        learning_rate=cfg.train.learning_rate,
        epochs=cfg.train.epochs,
        batch_size=cfg.train.batch_size,
        seed=cfg.seed if seed is None else seed,
        hidden=cfg.train.hidden,
    )
    return train(samples, tcfg)


def refine_image(
    image,
    proposals,
    cfg: RunConfig,
    weights: MlpWeights,
    bundles,
    postprocess: bool = True,
):
    """Refine a batch; returns (raw proposals, post-processed or None)."""
    raw = refine_batch(proposals, bundles, weights, cfg.train.threshold)
    if not postprocess:
        return raw, None
    stats = {
        lv: compute_stats(bundles[lv].label_map, image) for lv in bundles
    }
    processed = []
    for rp in raw:
        fp = filter_proposal(rp, stats[rp.level], bundles[rp.level].label_map, cfg.postprocess)
        mask = open_close(fp.mask, cfg.postprocess.radius)
        processed.append(
            RefinedProposal(fp.superpixel_ids, mask, fp.score, fp.level, fp.probabilities)
        )
    processed = nms(processed, cfg.postprocess.nms_iou)
    return raw, processed


def run_refine(root, manifest, cfg: RunConfig, weights, out_dir, postprocess=True, labels_dir=None):
    """Refine every image of a dataset; writes raw/ (and post/) indexes."""
    raw_dir = os.path.join(out_dir, "raw")
    post_dir = os.path.join(out_dir, "post")
    index = []
    for entry in manifest["images"]:
        stem = stem_of(entry["image"])
        image = load_image(os.path.join(root, entry["image"]))
        proposals = load_proposals_manifest(root, entry["proposals"])
        label_maps = segment_image_levels(image, cfg, root, stem, labels_dir)
        bundles = build_bundles(cfg, root, stem, label_maps)
        raw, post = refine_image(image, proposals, cfg, weights, bundles, postprocess)
        rec = {"image": entry["image"], "gt": entry["gt"], "stem": stem}
        rec["raw"] = save_refined(raw_dir, stem, entry["image"], raw)
        if post is not None:
            rec["post"] = save_refined(post_dir, stem, entry["image"], post)
        index.append(rec)
    with open(os.path.join(out_dir, "refined.json"), "w") as fh:
        json.dump({"images": index}, fh, indent=1)
    return index


def evaluate_refined(
    root, manifest, cfg: RunConfig, refined_dir, variant="post", labels_dir=None,
    with_label_maps=True,
) -> MetricsReport:
    """MetricsReport for one refined-proposals variant ("raw" or "post")."""
    with open(os.path.join(refined_dir, "refined.json")) as fh:
        index = json.load(fh)["images"]
    proposals_per_image, gts_per_image, lms_per_image = [], [], []
    sub = os.path.join(refined_dir, variant)
    for rec in index:
        if variant not in rec:
            raise ValidationError(f"no '{variant}' proposals for image {rec['image']}")
        gts = load_gt_manifest(root, rec["gt"])
        props = load_refined(sub, rec[variant])
        proposals_per_image.append(props)
        gts_per_image.append(gts)
        if with_label_maps:
            image = load_image(os.path.join(root, rec["image"]))
            lms = segment_image_levels(image, cfg, root, rec["stem"], labels_dir)
            lms_per_image.append(list(lms.values()))
    return evaluate_dataset(
        proposals_per_image,
        gts_per_image,
        lms_per_image if with_label_maps else None,
        cfg.metrics,
    )


def write_overlay(image, gts, proposals, path):
    """Qualitative overlay: GT contours green, best-proposal contours red."""
    import cv2

    from .raster import mask_iou

    canvas = np.ascontiguousarray((image.data[:, :, ::-1] * 255).astype(np.uint8))
    for gt in gts:
        best, best_iou = None, 0.0
        for m, _ in proposals:
            v = mask_iou(m, gt.mask)
            if v > best_iou:
                best, best_iou = m, v
        if best is not None:
            contours, _ = cv2.findContours(
                best.bits.astype(np.uint8), cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE
            )
            cv2.drawContours(canvas, contours, -1, (0, 0, 255), 1)
        contours, _ = cv2.findContours(
            gt.mask.bits.astype(np.uint8), cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE
        )
        cv2.drawContours(canvas, contours, -1, (0, 255, 0), 1)
    cv2.imwrite(str(path), canvas)


def write_overlays(root, manifest, refined_dir, variant, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(refined_dir, "refined.json")) as fh:
        index = json.load(fh)["images"]
    for rec in index:
        if variant not in rec:
            continue
        image = load_image(os.path.join(root, rec["image"]))
        gts = load_gt_manifest(root, rec["gt"])
        props = load_refined(os.path.join(refined_dir, variant), rec[variant])
        write_overlay(image, gts, props, os.path.join(out_dir, f"{rec['stem']}.png"))


def evaluate_coarse(root, manifest, cfg: RunConfig, threshold=0.5, with_label_maps=False,
                    labels_dir=None) -> MetricsReport:
    """Baseline report: coarse windows thresholded into image-space masks."""
    proposals_per_image, gts_per_image, lms_per_image = [], [], []
    for entry in manifest["images"]:
        image = load_image(os.path.join(root, entry["image"]))
        gts = load_gt_manifest(root, entry["gt"])
        cps = load_proposals_manifest(root, entry["proposals"])
        masks = [
            (coarse_mask(cp, image.width, image.height, threshold), cp.score) for cp in cps
        ]
        proposals_per_image.append(masks)
        gts_per_image.append(gts)
        if with_label_maps:
            lms = segment_image_levels(image, cfg, root, stem_of(entry["image"]), labels_dir)
            lms_per_image.append(list(lms.values()))
    return evaluate_dataset(
        proposals_per_image,
        gts_per_image,
        lms_per_image if with_label_maps else None,
        cfg.metrics,
    )
