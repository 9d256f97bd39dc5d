"""Run configuration: per-level segmentation settings plus post-processing,
metric, and training knobs. Loads from TOML or JSON.

Level target counts descend from the finest level (most superpixels, for
the smallest objects) to the coarsest; `geometric_targets` produces the
regular intermediate steps between the two endpoints.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, asdict

import numpy as np

from .classifier import DEFAULT_HIDDEN
from .errors import ValidationError
from .fh import FhParams
from .metrics import MetricsConfig
from .postprocess import PostprocessConfig
from .synth import SynthConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def geometric_targets(finest: int, coarsest: int, levels: int) -> list[int]:
    """Superpixel-count targets with regular (geometric) intermediate steps."""
    if levels < 1:
        raise ValidationError("need at least one level")
    if levels == 1:
        return [finest]
    ratio = coarsest / finest
    return [int(round(finest * ratio ** (i / (levels - 1)))) for i in range(levels)]


@dataclass(frozen=True)
class LevelConfig:
    index: int
    target_count: int
    fh: FhParams = FhParams()
    features: str | None = None  # path pattern with {stem} and {level}

    def feature_path(self, stem: str) -> str | None:
        if self.features is None:
            return None
        return self.features.format(stem=stem, level=self.index)


@dataclass(frozen=True)
class TrainSettings:
    learning_rate: float = 0.05
    epochs: int = 60
    batch_size: int = 64
    hidden: tuple = DEFAULT_HIDDEN
    neg_ratio: int = 3      # negatives subsampled per positive
    threshold: float = 0.5  # object decision threshold


@dataclass(frozen=True)
class RunConfig:
    levels: tuple
    postprocess: PostprocessConfig = PostprocessConfig()
    metrics: MetricsConfig = MetricsConfig()
    train: TrainSettings = TrainSettings()
    synth: SynthConfig = SynthConfig()
    seed: int = 0

    def __post_init__(self):
        if not self.levels:
            raise ValidationError("config needs at least one level")
        indices = [lv.index for lv in self.levels]
        if indices != list(range(len(self.levels))):
            raise ValidationError("level indices must be 0..n-1 in order")
        counts = [lv.target_count for lv in self.levels]
        if any(b >= a for a, b in zip(counts, counts[1:])):
            raise ValidationError(
                "level target counts must descend from finest to coarsest"
            )

    def level(self, index: int) -> LevelConfig:
        for lv in self.levels:
            if lv.index == index:
                return lv
        raise ValidationError(f"no level {index} in config")


def default_config(levels: int = 2, finest: int = 800, coarsest: int = 200) -> RunConfig:
    targets = geometric_targets(finest, coarsest, levels)
    return RunConfig(
        levels=tuple(
            LevelConfig(index=i, target_count=t, features="features/{stem}_l{level}.fmap")
            for i, t in enumerate(targets)
        )
    )


def _fh_from_dict(d: dict) -> FhParams:
    return FhParams(**d)


def config_from_dict(raw: dict) -> RunConfig:
    levels = []
    for i, lv in enumerate(raw.get("levels", [])):
        levels.append(
            LevelConfig(
                index=int(lv.get("index", i)),
                target_count=int(lv["target_count"]),
                fh=_fh_from_dict(lv.get("fh", {})),
                features=lv.get("features"),
            )
        )
    if not levels:
        return default_config()
    kwargs = {}
    if "postprocess" in raw:
        kwargs["postprocess"] = PostprocessConfig(**raw["postprocess"])
    if "metrics" in raw:
        m = dict(raw["metrics"])
        for key in ("ar_iou_thresholds", "budgets"):
            if key in m:
                m[key] = tuple(m[key])
        kwargs["metrics"] = MetricsConfig(**m)
    if "train" in raw:
        t = dict(raw["train"])
        if "hidden" in t:
            t["hidden"] = tuple(t["hidden"])
        kwargs["train"] = TrainSettings(**t)
    if "synth" in raw:
        kwargs["synth"] = SynthConfig(**raw["synth"])
    return RunConfig(levels=tuple(levels), seed=int(raw.get("seed", 0)), **kwargs)


def load_config(path) -> RunConfig:
    text = open(path, "rb").read()
    if str(path).endswith(".toml"):
        raw = tomllib.loads(text.decode("utf-8"))
    else:
        raw = json.loads(text.decode("utf-8"))
    return config_from_dict(raw)


def config_to_dict(cfg: RunConfig) -> dict:
    out = {
        "seed": cfg.seed,
        "levels": [
            {
                "index": lv.index,
                "target_count": lv.target_count,
                "fh": asdict(lv.fh),
                **({"features": lv.features} if lv.features else {}),
            }
            for lv in cfg.levels
        ],
        "postprocess": asdict(cfg.postprocess),
        "metrics": {
            "ar_iou_thresholds": list(np.asarray(cfg.metrics.ar_iou_thresholds, dtype=float)),
            "budgets": list(cfg.metrics.budgets),
            "boundary_tolerance": cfg.metrics.boundary_tolerance,
            "oe_overlap_fraction": cfg.metrics.oe_overlap_fraction,
        },
        "train": {**asdict(cfg.train), "hidden": list(cfg.train.hidden)},
        "synth": asdict(cfg.synth),
    }
    return out


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
