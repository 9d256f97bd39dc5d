import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spxrefine import (
    BinaryMask,
    FeatureMap,
    LabelMap,
    RasterIOError,
    Rect,
    RgbImage,
    ValidationError,
    load_image,
    load_mask,
    mask_iou,
    read_feature_map,
    read_label_map,
    save_image,
    save_mask,
    write_feature_map,
    write_label_map,
)


def test_load_image_scaling_8bit(tmp_path):
    img = RgbImage(np.array([[[1.0, 0.0, 0.0]]]))
    path = tmp_path / "red.png"
    save_image(img, path)
    loaded = load_image(path)
    assert loaded.width == 1 and loaded.height == 1
    np.testing.assert_allclose(loaded.data, [[[1.0, 0.0, 0.0]]])


def test_load_image_all_black(tmp_path):
    path = tmp_path / "black.png"
    save_image(RgbImage(np.zeros((2, 2, 3))), path)
    assert load_image(path).data.max() == 0.0


def test_load_image_16bit_grayscale(tmp_path):
    import cv2

    path = str(tmp_path / "g16.png")
    cv2.imwrite(path, np.array([[65535, 0]], dtype=np.uint16))
    loaded = load_image(path)
    np.testing.assert_allclose(loaded.data[0, 0], [1.0, 1.0, 1.0])
    np.testing.assert_allclose(loaded.data[0, 1], [0.0, 0.0, 0.0])


def test_load_image_ppm(tmp_path):
    path = tmp_path / "img.ppm"
    path.write_bytes(b"P6\n2 1\n255\n" + bytes([255, 0, 0, 0, 0, 255]))
    loaded = load_image(path)
    np.testing.assert_allclose(loaded.data[0, 0], [1.0, 0.0, 0.0])
    np.testing.assert_allclose(loaded.data[0, 1], [0.0, 0.0, 1.0])


def test_load_image_truncated(tmp_path):
    path = tmp_path / "broken.png"
    save_image(RgbImage(np.zeros((8, 8, 3))), path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(RasterIOError) as exc:
        load_image(path)
    assert exc.value.code == "corrupt-image"


def test_load_image_missing(tmp_path):
    with pytest.raises(RasterIOError):
        load_image(tmp_path / "nope.png")


def test_mask_png_roundtrip(tmp_path):
    bits = np.zeros((5, 7), dtype=bool)
    bits[1:3, 2:5] = True
    path = tmp_path / "m.png"
    save_mask(BinaryMask(bits), path)
    assert (load_mask(path).bits == bits).all()


def test_fmap_roundtrip_small(tmp_path):
    data = np.arange(12, dtype=np.float32).reshape(2, 2, 3)
    path = tmp_path / "f.fmap"
    write_feature_map(FeatureMap(data), path)
    back = read_feature_map(path)
    assert (back.data == data).all()
    assert back.dim == 3


def test_fmap_bad_magic(tmp_path):
    path = tmp_path / "f.fmap"
    write_feature_map(FeatureMap(np.zeros((1, 1, 1), np.float32)), path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XMAP"
    path.write_bytes(bytes(raw))
    with pytest.raises(RasterIOError) as exc:
        read_feature_map(path)
    assert exc.value.code == "bad-magic"


def test_fmap_payload_mismatch(tmp_path):
    import struct

    path = tmp_path / "f.fmap"
    payload = np.zeros(100, dtype="<f4").tobytes()
    path.write_bytes(b"FMAP" + struct.pack("<III", 4, 4, 8) + payload)
    with pytest.raises(RasterIOError) as exc:
        read_feature_map(path)
    assert exc.value.code == "payload-size-mismatch"


def test_spxl_roundtrip_and_count(tmp_path):
    lm = LabelMap(np.array([[0, 0], [1, 1]]))
    assert lm.count == 2
    path = tmp_path / "l.spxl"
    write_label_map(lm, path)
    back = read_label_map(path)
    assert (back.labels == lm.labels).all()


def test_spxl_nondense_rejected(tmp_path):
    import struct

    path = tmp_path / "l.spxl"
    labels = np.array([[0, 2]], dtype="<u4")  # label 1 missing, count 3
    path.write_bytes(b"SPXL" + struct.pack("<III", 1, 2, 3) + labels.tobytes())
    with pytest.raises(RasterIOError) as exc:
        read_label_map(path)
    assert exc.value.code == "invalid-label-map"


def test_spxl_roundtrip_random_partition(tmp_path, rng):
    raw = rng.integers(0, 37, size=(100, 100))
    _, dense = np.unique(raw, return_inverse=True)
    lm = LabelMap(dense.reshape(100, 100))
    path = tmp_path / "big.spxl"
    write_label_map(lm, path)
    first = path.read_bytes()
    write_label_map(read_label_map(path), path)
    assert path.read_bytes() == first  # bit-exact round trip


@settings(max_examples=25, deadline=None)
@given(
    h=st.integers(1, 6),
    w=st.integers(1, 6),
    d=st.integers(1, 5),
    seed=st.integers(0, 2**31),
)
def test_fmap_roundtrip_property(tmp_path_factory, h, w, d, seed):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((h, w, d)).astype(np.float32)
    path = tmp_path_factory.mktemp("fmap") / "x.fmap"
    write_feature_map(FeatureMap(data), path)
    assert (read_feature_map(path).data == data).all()


def test_mask_iou_values():
    a = BinaryMask(np.array([[1, 1, 0]], dtype=bool))
    b = BinaryMask(np.array([[1, 0, 1]], dtype=bool))
    assert mask_iou(a, a) == 1.0
    assert mask_iou(a, b) == pytest.approx(1 / 3)
    disjoint = BinaryMask(np.array([[0, 0, 1]], dtype=bool))
    assert mask_iou(a, disjoint) == 0.0
    empty = BinaryMask(np.zeros((1, 3), dtype=bool))
    assert mask_iou(empty, empty) == 0.0


def test_mask_iou_dim_mismatch():
    with pytest.raises(ValidationError):
        mask_iou(BinaryMask(np.zeros((2, 2), bool)), BinaryMask(np.zeros((2, 3), bool)))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), h=st.integers(1, 8), w=st.integers(1, 8))
def test_mask_iou_symmetric_bounded(seed, h, w):
    rng = np.random.default_rng(seed)
    a = BinaryMask(rng.random((h, w)) < 0.5)
    b = BinaryMask(rng.random((h, w)) < 0.5)
    ab, ba = mask_iou(a, b), mask_iou(b, a)
    assert ab == ba
    assert 0.0 <= ab <= 1.0
    if a.area:
        assert mask_iou(a, a) == 1.0


def test_label_map_invariants():
    with pytest.raises(ValidationError):
        LabelMap(np.array([[0, 2]]))  # gap in ids
    with pytest.raises(ValidationError):
        LabelMap(np.array([[1, 2]]))  # does not start at 0


def test_rect_clip():
    r = Rect(-5, -5, 20, 8)
    c = r.clip(10, 10)
    assert (c.x, c.y, c.w, c.h) == (0, 0, 10, 3)
    with pytest.raises(ValidationError):
        Rect(100, 100, 5, 5).clip(10, 10)
    with pytest.raises(ValidationError):
        Rect(0, 0, 0, 5)
