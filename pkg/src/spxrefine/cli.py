"""Command-line entry point.

Subcommands: segment, calibrate, synth, train, refine, eval. Every command
is reproducible from (config, seed); failures exit nonzero with a JSON
error object on stderr.
"""

from __future__ import annotations

import glob
import json
import os
import sys
from dataclasses import replace

import click
import numpy as np

from . import pipeline
from .classifier import load_weights, save_weights
from .config import LevelConfig, RunConfig, config_to_dict, default_config, load_config
from .errors import SpxError, ValidationError
from .fh import calibrate as fh_calibrate
from .manifests import load_gt_manifest
from .raster import load_image, write_label_map
from .synth import generate_dataset


def _load_config(path) -> RunConfig:
    if path is None:
        return default_config()
    return load_config(path)


def _override_alpha(cfg: RunConfig, alpha) -> RunConfig:
    if alpha is None:
        return cfg
    levels = tuple(
        LevelConfig(lv.index, lv.target_count, replace(lv.fh, alpha=alpha), lv.features)
        for lv in cfg.levels
    )
    return replace(cfg, levels=levels)


def _parse_levels(cfg: RunConfig, levels_opt):
    if not levels_opt:
        return [lv.index for lv in cfg.levels]
    return [int(x) for x in levels_opt.split(",")]


@click.group()
def cli():
    """Superpixel segmentation and object-proposal refinement toolkit."""


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--image", "image_path", type=click.Path(exists=True), required=True,
              help="Image file or directory of images.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--alpha", type=float, default=None, help="Override the feature blend weight.")
@click.option("--levels", "levels_opt", default=None, help="Comma-separated level indices.")
def segment(config_path, image_path, out_dir, alpha, levels_opt):
    """Segment image(s) into one label map per configured level."""
    cfg = _override_alpha(_load_config(config_path), alpha)
    indices = _parse_levels(cfg, levels_opt)
    os.makedirs(out_dir, exist_ok=True)
    if os.path.isdir(image_path):
        root = image_path
        # a dataset root keeps its images under images/; feature patterns
        # resolve relative to the root either way
        img_dir = os.path.join(image_path, "images")
        if not os.path.isdir(img_dir):
            img_dir = image_path
        paths = sorted(
            p for ext in ("png", "ppm") for p in glob.glob(os.path.join(img_dir, f"*.{ext}"))
        )
    else:
        paths = [image_path]
        root = os.path.dirname(image_path) or "."
    if not paths:
        raise ValidationError(f"no images found under {image_path}")
    for path in paths:
        stem = pipeline.stem_of(path)
        image = load_image(path)
        for idx in indices:
            lv = cfg.level(idx)
            features = pipeline.resolve_features(root, lv, stem, required=lv.fh.alpha > 0.0)
            from .fh import segment as fh_segment

            lm = fh_segment(image, features, lv.fh)
            out = os.path.join(out_dir, f"{stem}_l{idx}.spxl")
            write_label_map(lm, out)
            click.echo(f"{stem} level {idx}: {lm.count} superpixels -> {out}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--images", "images_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Updated config JSON with calibrated k per level.")
@click.option("--levels", "levels_opt", default=None)
def calibrate(config_path, images_dir, out_path, levels_opt):
    """Search the merge threshold k per level for its target superpixel count."""
    cfg = _load_config(config_path)
    indices = _parse_levels(cfg, levels_opt)
    img_dir = os.path.join(images_dir, "images")
    if not os.path.isdir(img_dir):
        img_dir = images_dir
    paths = sorted(
        p for ext in ("png", "ppm") for p in glob.glob(os.path.join(img_dir, f"*.{ext}"))
    )
    if not paths:
        raise ValidationError(f"no calibration images under {images_dir}")
    images = [load_image(p) for p in paths]
    out = config_to_dict(cfg)
    new_levels = list(cfg.levels)
    for idx in indices:
        lv = cfg.level(idx)
        pairs = []
        for p, img in zip(paths, images):
            fm = pipeline.resolve_features(
                images_dir, lv, pipeline.stem_of(p), required=lv.fh.alpha > 0.0
            )
            pairs.append((img, fm))
        result = fh_calibrate(pairs, lv.target_count, lv.fh)
        new_levels[idx] = LevelConfig(lv.index, lv.target_count, result.params, lv.features)
        entry = out["levels"][idx]
        entry["fh"]["k"] = result.params.k
        entry["achieved_count"] = result.mean_count
        entry["warning"] = result.warning
        status = "warning: target unreachable" if result.warning else "ok"
        click.echo(
            f"level {idx}: target {lv.target_count}, achieved {result.mean_count:.1f}, "
            f"k={result.params.k:.6g} ({status}, {result.iterations} evals)"
        )
    with open(out_path, "w") as fh:
        json.dump(out, fh, indent=2)
    click.echo(f"wrote {out_path}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--count", type=int, required=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def synth(config_path, count, seed, out_dir):
    """Generate a seeded synthetic dataset (images, GT, coarse proposals)."""
    cfg = _load_config(config_path)
    manifest = generate_dataset(
        out_dir, count, cfg.seed if seed is None else seed, cfg.synth
    )
    click.echo(f"wrote {count} images to {out_dir} ({len(manifest['images'])} manifest entries)")


def _read_manifest(data_dir):
    path = os.path.join(data_dir, "manifest.json")
    if not os.path.exists(path):
        raise ValidationError(f"no manifest.json under {data_dir}")
    with open(path) as fh:
        return json.load(fh)


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--labels", "labels_dir", type=click.Path(exists=True), default=None,
              help="Reuse precomputed SPXL label maps.")
def train(config_path, data_dir, out_path, seed, labels_dir):
    """Train the superpixel classifier on a dataset."""
    cfg = _load_config(config_path)
    manifest = _read_manifest(data_dir)
    weights, losses = pipeline.train_from_manifest(data_dir, manifest, cfg, seed, labels_dir)
    save_weights(weights, out_path)
    click.echo(
        f"trained {len(losses)} epochs, final loss {losses[-1]:.4f} -> {out_path}"
    )


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--weights", "weights_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--no-postprocess", is_flag=True, default=False)
@click.option("--labels", "labels_dir", type=click.Path(exists=True), default=None)
def refine(config_path, data_dir, weights_path, out_dir, no_postprocess, labels_dir):
    """Refine every coarse proposal of a dataset into superpixel-precise masks."""
    cfg = _load_config(config_path)
    manifest = _read_manifest(data_dir)
    weights = load_weights(weights_path)
    index = pipeline.run_refine(
        data_dir, manifest, cfg, weights, out_dir,
        postprocess=not no_postprocess, labels_dir=labels_dir,
    )
    click.echo(f"refined {len(index)} images -> {out_dir}")


@cli.command("eval")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--refined", "refined_dir", type=click.Path(exists=True), default=None)
@click.option("--coarse", is_flag=True, default=False,
              help="Evaluate the coarse proposals thresholded at 0.5 instead.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--labels", "labels_dir", type=click.Path(exists=True), default=None)
@click.option("--no-aiou", is_flag=True, default=False,
              help="Skip the (segmentation-dependent) achievable-IoU measure.")
@click.option("--overlays", "overlays_dir", type=click.Path(), default=None,
              help="Write qualitative contour overlays (GT green, proposal red).")
def eval_cmd(config_path, data_dir, refined_dir, coarse, out_path, labels_dir, no_aiou,
             overlays_dir):
    """Emit the metric report (JSON + table), with and without post-processing."""
    cfg = _load_config(config_path)
    manifest = _read_manifest(data_dir)
    reports = {}
    if coarse:
        reports["coarse"] = pipeline.evaluate_coarse(
            data_dir, manifest, cfg, with_label_maps=not no_aiou, labels_dir=labels_dir
        )
    elif refined_dir is None:
        raise ValidationError("provide --refined DIR or --coarse")
    else:
        for variant in ("raw", "post"):
            if os.path.isdir(os.path.join(refined_dir, variant)):
                reports[variant] = pipeline.evaluate_refined(
                    data_dir, manifest, cfg, refined_dir, variant,
                    labels_dir=labels_dir, with_label_maps=not no_aiou,
                )
    if not reports:
        raise ValidationError(f"nothing to evaluate under {refined_dir}")
    if overlays_dir and refined_dir:
        variant = "post" if "post" in reports else "raw"
        pipeline.write_overlays(data_dir, manifest, refined_dir, variant, overlays_dir)
        click.echo(f"wrote overlays to {overlays_dir}")
    for name, report in reports.items():
        click.echo(f"--- {name} ---")
        click.echo(report.to_table())
    if out_path:
        with open(out_path, "w") as fh:
            json.dump({k: r.to_dict() for k, r in reports.items()}, fh, indent=2)
        click.echo(f"wrote {out_path}")


def main(argv=None):
    try:
        cli(args=argv, standalone_mode=False)
        return 0
    except SpxError as exc:
        print(json.dumps(exc.to_json()), file=sys.stderr)
        return 2
    except click.ClickException as exc:
        print(json.dumps({"code": "usage", "message": exc.format_message()}), file=sys.stderr)
        return exc.exit_code or 2
    except click.Abort:
        print(json.dumps({"code": "aborted", "message": "aborted"}), file=sys.stderr)
        return 130
    except Exception as exc:  # pragma: no cover - defensive
        print(json.dumps({"code": "internal", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
