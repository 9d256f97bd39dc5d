"""Input validation helpers shared by the estimators and functional API.

Public entry points accept either the toolkit's raster dataclasses or plain
numpy arrays of the right shape; these helpers normalize and validate.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .raster import BinaryMask, FeatureMap, LabelMap, RgbImage


def check_image(img) -> RgbImage:
    if isinstance(img, RgbImage):
        return img
    return RgbImage(np.asarray(img))


def check_features(fm) -> FeatureMap:
    if isinstance(fm, FeatureMap):
        return fm
    return FeatureMap(np.asarray(fm))


def check_label_map(lm) -> LabelMap:
    if isinstance(lm, LabelMap):
        return lm
    return LabelMap(np.asarray(lm))


def check_mask(mask) -> BinaryMask:
    if isinstance(mask, BinaryMask):
        return mask
    return BinaryMask(np.asarray(mask))


def check_same_size(a, b, what="inputs"):
    if (a.height, a.width) != (b.height, b.width):
        raise ValidationError(
            f"{what} differ in size: {a.height}x{a.width} vs {b.height}x{b.width}"
        )
