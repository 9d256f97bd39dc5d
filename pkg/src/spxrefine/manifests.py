"""JSON manifest readers/writers for datasets and proposal sets.

GT manifest:        {"image": path, "objects": [{"id": int, "mask_png": path}]}
Coarse proposals:   {"image": path, "level_count": int,
                     "proposals": [{"rect": {x,y,w,h}, "level": int,
                                    "score": float, "window_file": fmap path}]}
Refined proposals:  mask PNGs plus {"image": path,
                     "proposals": [{"mask_png": path, "score": float, "level": int}]}

All paths inside a manifest are relative to the manifest's directory root
(the dataset root), so a dataset can be moved as a unit.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import ValidationError
from .groundtruth import GtObject
from .raster import Rect, load_mask, read_feature_map, save_mask
from .refine import CoarseProposal, RefinedProposal


def load_gt_manifest(root, manifest_rel) -> list[GtObject]:
    with open(os.path.join(root, manifest_rel)) as fh:
        raw = json.load(fh)
    objects = []
    for entry in raw.get("objects", []):
        mask = load_mask(os.path.join(root, entry["mask_png"]))
        objects.append(GtObject(id=int(entry["id"]), mask=mask, category=entry.get("category")))
    return objects


def load_proposals_manifest(root, manifest_rel) -> list[CoarseProposal]:
    with open(os.path.join(root, manifest_rel)) as fh:
        raw = json.load(fh)
    proposals = []
    for entry in raw.get("proposals", []):
        fm = read_feature_map(os.path.join(root, entry["window_file"]))
        if fm.dim != 1 or fm.data.shape[:2] != (40, 40):
            raise ValidationError(
                f"window file {entry['window_file']} must be a 40x40 FMAP of dim 1"
            )
        r = entry["rect"]
        proposals.append(
            CoarseProposal(
                window=np.clip(fm.data[:, :, 0].astype(np.float64), 0.0, 1.0),
                rect=Rect(int(r["x"]), int(r["y"]), int(r["w"]), int(r["h"])),
                level=int(entry["level"]),
                score=float(entry["score"]),
            )
        )
    return proposals


def save_refined(root, stem, image_rel, refined: list[RefinedProposal]) -> str:
    """Write refined masks and their JSON index; returns the index path."""
    os.makedirs(root, exist_ok=True)
    entries = []
    for i, rp in enumerate(refined):
        mask_rel = f"{stem}_r{i:03d}.png"
        save_mask(rp.mask, os.path.join(root, mask_rel))
        entries.append({"mask_png": mask_rel, "score": rp.score, "level": rp.level})
    index_rel = f"{stem}.json"
    with open(os.path.join(root, index_rel), "w") as fh:
        json.dump({"image": image_rel, "proposals": entries}, fh, indent=1)
    return index_rel


def load_refined(root, index_rel):
    """Read a refined-proposal index; returns [(BinaryMask, score)]."""
    with open(os.path.join(root, index_rel)) as fh:
        raw = json.load(fh)
    out = []
    for entry in raw.get("proposals", []):
        out.append((load_mask(os.path.join(root, entry["mask_png"])), float(entry["score"])))
    return out
