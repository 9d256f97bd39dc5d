"""Core raster types and bit-exact binary file I/O.

Formats (all little-endian, 4-byte ASCII magic):

    FMAP  feature maps      magic "FMAP", u32 height, width, dim,
                            then height*width*dim float32, row-major,
                            channel-fastest.
    SPXL  label maps        magic "SPXL", u32 height, width, count,
                            then height*width uint32 labels, row-major.

Images and masks travel as PNG/PPM (8- or 16-bit); channels are scaled to
[0, 1] by the format's maximum value at load time. Mask PNGs use
nonzero = foreground.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import cv2
import numpy as np

from .errors import RasterIOError, ValidationError

FMAP_MAGIC = b"FMAP"
SPXL_MAGIC = b"SPXL"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RgbImage:
    """Per-pixel 3-channel color, each channel in [0, 1], shape (H, W, 3)."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 3 or d.shape[2] != 3:
            raise ValidationError("image data must have shape (H, W, 3)")
        if not np.isfinite(d).all() or d.min() < 0.0 or d.max() > 1.0:
            raise ValidationError("image channels must be finite and in [0, 1]")
        object.__setattr__(self, "data", _freeze(d))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class FeatureMap:
    """Per-pixel D-dimensional feature vectors, shape (H, W, D), float32."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float32)
        if d.ndim != 3 or d.shape[2] < 1:
            raise ValidationError("feature data must have shape (H, W, D), D >= 1")
        if not np.isfinite(d).all():
            raise ValidationError("feature values must be finite")
        object.__setattr__(self, "data", _freeze(d))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class LabelMap:
    """Partition of the pixel lattice; ids dense in [0, count), shape (H, W)."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ValidationError("label map must be 2-D")
        if not np.issubdtype(lab.dtype, np.integer):
            raise ValidationError("labels must be integers")
        lab = lab.astype(np.int64, copy=True)
        uniq = np.unique(lab)
        if uniq[0] != 0 or uniq[-1] != len(uniq) - 1:
            raise ValidationError(
                "invalid label map: ids must be dense in [0, count)",
                code="invalid-label-map",
            )
        object.__setattr__(self, "labels", _freeze(lab))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def count(self) -> int:
        return int(self.labels.max()) + 1


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel boolean mask, shape (H, W)."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise ValidationError("mask must be 2-D")
        object.__setattr__(self, "bits", _freeze(b.astype(bool, copy=True)))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def area(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class Rect:
    """Image-space rectangle: top-left (x, y), extent (w, h) in pixels."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValidationError("rect extent must be positive")

    def clip(self, width: int, height: int) -> "Rect":
        """Intersect with image bounds [0, width) x [0, height)."""
        x0 = max(self.x, 0)
        y0 = max(self.y, 0)
        x1 = min(self.x + self.w, width)
        y1 = min(self.y + self.h, height)
        if x1 <= x0 or y1 <= y0:
            raise ValidationError("rect does not intersect the image")
        return Rect(x0, y0, x1 - x0, y1 - y0)


# ---------------------------------------------------------------------------
# Image / mask I/O (PNG, PPM)
# ---------------------------------------------------------------------------


def load_image(path) -> RgbImage:
    """Load an 8- or 16-bit RGB/grayscale PNG or PPM, scaled to [0, 1].

    Grayscale images are replicated to 3 channels. Raises RasterIOError with
    code "corrupt-image" for unreadable files and "unsupported-bit-depth" for
    sample types other than uint8/uint16.
    """
    if not os.path.exists(path):
        raise RasterIOError(f"no such file: {path}", code="corrupt-image")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED | cv2.IMREAD_ANYDEPTH)
    if raw is None:
        raise RasterIOError(f"corrupt image: {path}", code="corrupt-image")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise RasterIOError(
            f"unsupported bit depth {raw.dtype} in {path}",
            code="unsupported-bit-depth",
        )
    if raw.ndim == 2:
        raw = np.repeat(raw[:, :, None], 3, axis=2)
    elif raw.shape[2] == 4:  # drop alpha
        raw = raw[:, :, :3]
    if raw.shape[2] != 3:
        raise RasterIOError(f"unsupported channel count in {path}", code="corrupt-image")
    rgb = raw[:, :, ::-1].astype(np.float64) / scale  # cv2 loads BGR
    return RgbImage(rgb)


def save_image(img: RgbImage, path) -> None:
    """Write an RgbImage as an 8-bit PNG/PPM (by extension)."""
    u8 = np.clip(np.round(img.data * 255.0), 0, 255).astype(np.uint8)
    if not cv2.imwrite(str(path), u8[:, :, ::-1]):
        raise RasterIOError(f"cannot write image: {path}")


def load_mask(path) -> BinaryMask:
    """Load a mask PNG; nonzero = foreground."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED | cv2.IMREAD_ANYDEPTH)
    if raw is None:
        raise RasterIOError(f"corrupt image: {path}", code="corrupt-image")
    if raw.ndim == 3:
        raw = raw.max(axis=2)
    return BinaryMask(raw != 0)


def save_mask(mask: BinaryMask, path) -> None:
    u8 = np.where(mask.bits, 255, 0).astype(np.uint8)
    if not cv2.imwrite(str(path), u8):
        raise RasterIOError(f"cannot write mask: {path}")


# ---------------------------------------------------------------------------
# FMAP / SPXL binary formats
# ---------------------------------------------------------------------------


def write_feature_map(fm: FeatureMap, path) -> None:
    with open(path, "wb") as fh:
        fh.write(FMAP_MAGIC)
        fh.write(struct.pack("<III", fm.height, fm.width, fm.dim))
        fh.write(np.ascontiguousarray(fm.data, dtype="<f4").tobytes())


def read_feature_map(path) -> FeatureMap:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FMAP_MAGIC:
            raise RasterIOError(f"bad magic {magic!r} in {path}", code="bad-magic")
        header = fh.read(12)
        if len(header) != 12:
            raise RasterIOError(f"truncated header in {path}", code="payload-size-mismatch")
        h, w, d = struct.unpack("<III", header)
        payload = fh.read()
    expected = h * w * d * 4
    if len(payload) != expected:
        raise RasterIOError(
            f"payload size mismatch in {path}: header says {expected} bytes, got {len(payload)}",
            code="payload-size-mismatch",
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(h, w, d)
    return FeatureMap(data)


def write_label_map(lm: LabelMap, path) -> None:
    with open(path, "wb") as fh:
        fh.write(SPXL_MAGIC)
        fh.write(struct.pack("<III", lm.height, lm.width, lm.count))
        fh.write(np.ascontiguousarray(lm.labels, dtype="<u4").tobytes())


def read_label_map(path) -> LabelMap:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SPXL_MAGIC:
            raise RasterIOError(f"bad magic {magic!r} in {path}", code="bad-magic")
        header = fh.read(12)
        if len(header) != 12:
            raise RasterIOError(f"truncated header in {path}", code="payload-size-mismatch")
        h, w, count = struct.unpack("<III", header)
        payload = fh.read()
    if len(payload) != h * w * 4:
        raise RasterIOError(
            f"payload size mismatch in {path}", code="payload-size-mismatch"
        )
    labels = np.frombuffer(payload, dtype="<u4").reshape(h, w).astype(np.int64)
    if labels.size and labels.max() >= count:
        raise RasterIOError(f"invalid label map: {path}", code="invalid-label-map")
    try:
        lm = LabelMap(labels)
    except ValidationError as exc:
        raise RasterIOError(f"invalid label map: {path}", code="invalid-label-map") from exc
    if lm.count != count:
        raise RasterIOError(f"invalid label map: {path}", code="invalid-label-map")
    return lm


# ---------------------------------------------------------------------------
# Mask geometry
# ---------------------------------------------------------------------------


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection-over-union of two same-sized masks; empty/empty -> 0."""
    if a.bits.shape != b.bits.shape:
        raise ValidationError("mask dimension mismatch")
    inter = int(np.count_nonzero(a.bits & b.bits))
    union = int(np.count_nonzero(a.bits | b.bits))
    if union == 0:
        return 0.0
    return inter / union
