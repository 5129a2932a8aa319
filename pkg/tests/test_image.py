import json

import cv2
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from camlens.dataset import Dataset, PairedScene, default_split, load_dataset, save_dataset
from camlens.errors import DatasetError, ImageDecodeError, ValidationError
from camlens.image import (add_bias, as_image, crop, encode_png, load_image, mean_intensity,
                           quantize, save_image, to_luminance)


def test_as_image_promotes_gray_and_rejects_nan():
    assert as_image(np.zeros((2, 3))).shape == (2, 3, 1)
    with pytest.raises(ValidationError):
        as_image(np.array([[np.nan]]))
    with pytest.raises(ValidationError):
        as_image(np.zeros((2, 2, 2)))


def test_load_8bit_gray_endpoints(tmp_path):
    cv2.imwrite(str(tmp_path / "g.png"), np.array([[0, 255]], np.uint8))
    img = load_image(tmp_path / "g.png")
    assert img.shape == (1, 2, 1)
    assert img[0, :, 0].tolist() == [0.0, 1.0]


def test_load_rgb_128(tmp_path):
    cv2.imwrite(str(tmp_path / "c.png"), np.full((1, 1, 3), 128, np.uint8))
    np.testing.assert_array_equal(load_image(tmp_path / "c.png")[0, 0], [128 / 255] * 3)


def test_load_keeps_channel_order(tmp_path):
    img = np.zeros((1, 1, 3))
    img[0, 0] = [1.0, 0.0, 0.0]
    save_image(img, tmp_path / "r.png")
    assert load_image(tmp_path / "r.png")[0, 0].tolist() == [1.0, 0.0, 0.0]


def test_truncated_file_is_decode_error(tmp_path):
    data = encode_png(np.full((8, 8, 3), 0.5))
    (tmp_path / "t.png").write_bytes(data[: len(data) // 2])
    with pytest.raises(ImageDecodeError, match="t.png"):
        load_image(tmp_path / "t.png")


def test_rgba_rejected(tmp_path):
    cv2.imwrite(str(tmp_path / "a.png"), np.zeros((2, 2, 4), np.uint8))
    with pytest.raises(ImageDecodeError):
        load_image(tmp_path / "a.png")


def test_save_quantization_rule(tmp_path):
    img = np.array([[[1.0], [0.3]]])
    save_image(img, tmp_path / "q.png", 8)
    raw = cv2.imread(str(tmp_path / "q.png"), cv2.IMREAD_UNCHANGED)
    assert raw.tolist() == [[255, 77]]


def test_16bit_roundtrip_constant(tmp_path):
    save_image(np.full((4, 4, 3), 0.5), tmp_path / "h.png", 16)
    assert np.abs(load_image(tmp_path / "h.png") - 0.5).max() <= 1 / 65535


@pytest.mark.invariant
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 3]))
def test_16bit_roundtrip_random(tmp_path_factory, seed, ch):
    img = np.random.default_rng(seed).uniform(size=(5, 7, ch))
    p = tmp_path_factory.mktemp("rt") / "x.png"
    save_image(img, p, 16)
    assert np.abs(load_image(p) - img).max() <= 1 / 65535


def test_save_is_atomic_and_leaves_no_temp(tmp_path):
    save_image(np.zeros((2, 2, 1)), tmp_path / "z.png")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["z.png"]


def test_quantize_matches_file_roundtrip(tmp_path, rng):
    img = rng.uniform(size=(6, 6, 3))
    save_image(img, tmp_path / "a.png", 16)
    np.testing.assert_array_equal(load_image(tmp_path / "a.png"), quantize(img, 16))


@pytest.mark.parametrize("rgb, expected", [((1, 1, 1), 1.0), ((1, 0, 0), 0.299), ((0.2, 0.4, 0.6), 0.299 * 0.2 + 0.587 * 0.4 + 0.114 * 0.6)])
def test_luminance(rgb, expected):
    img = np.array(rgb, float).reshape(1, 1, 3)
    assert to_luminance(img)[0, 0, 0] == pytest.approx(expected, abs=1e-12)


def test_luminance_passes_gray_through():
    g = np.full((2, 2, 1), 0.7)
    np.testing.assert_array_equal(to_luminance(g), g)


def test_mean_intensity(rng):
    assert mean_intensity(np.full((3, 3, 3), 0.25)) == 0.25
    assert mean_intensity(np.array([[0.0, 1.0]])) == 0.5
    img = rng.uniform(size=(17, 13, 3))
    total = 0.0
    for v in img.ravel().tolist():
        total += v
    assert abs(mean_intensity(img) - total / img.size) < 1e-12


def test_add_bias_examples():
    img = np.full((2, 2, 3), 0.4)
    np.testing.assert_array_equal(add_bias(img, 0.0), img)
    np.testing.assert_allclose(add_bias(img, 0.05), 0.45, atol=1e-15)
    np.testing.assert_array_equal(add_bias(np.full((2, 2, 3), 0.99), 0.05), 1.0)


@pytest.mark.invariant
@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-0.2, 0.2))
def test_add_bias_shifts_mean(seed, b):
    img = np.random.default_rng(seed).uniform(0.25, 0.75, size=(8, 8, 3))
    assert abs(mean_intensity(add_bias(img, b)) - (mean_intensity(img) + b)) < 1e-9


def test_crop_examples(rng):
    img = rng.uniform(size=(5, 7, 3))
    np.testing.assert_array_equal(crop(img, 0, 0, 7, 5), img)
    np.testing.assert_array_equal(crop(img, 0, 0, 1, 1)[0, 0], img[0, 0])
    with pytest.raises(ValidationError):
        crop(img, 0, 0, 8, 5)


@pytest.mark.invariant
@settings(max_examples=50, deadline=None)
@given(st.data())
def test_crop_composition(data):
    img = np.arange(20 * 16 * 1, dtype=float).reshape(16, 20, 1) / 320
    x0, y0 = data.draw(st.integers(0, 19)), data.draw(st.integers(0, 15))
    w, h = data.draw(st.integers(1, 20 - x0)), data.draw(st.integers(1, 16 - y0))
    x1, y1 = data.draw(st.integers(0, w - 1)), data.draw(st.integers(0, h - 1))
    w1, h1 = data.draw(st.integers(1, w - x1)), data.draw(st.integers(1, h - y1))
    np.testing.assert_array_equal(crop(crop(img, x0, y0, w, h), x1, y1, w1, h1),
                                  crop(img, x0 + x1, y0 + y1, w1, h1))


# ---- datasets ----

def _scene(sid, lw=20, lh=15, scale=2.0, seed=0):
    r = np.random.default_rng(seed)
    return PairedScene(sid, r.uniform(size=(lh, lw, 3)),
                       r.uniform(size=(round(lh * scale), round(lw * scale), 3)), scale)


def test_paired_scene_invariants():
    with pytest.raises(DatasetError):
        PairedScene("x", np.zeros((10, 10, 3)), np.zeros((25, 20, 3)), 2.0)
    with pytest.raises(ValidationError):
        PairedScene("x", np.zeros((10, 10, 3)), np.zeros((10, 10, 3)), 1.0)


def test_default_split_sizes():
    ids = [f"{i:03d}" for i in range(100)]
    s = default_split(ids)
    assert (len(s["train"]), len(s["val"]), len(s["test"])) == (90, 5, 5)
    assert set(s["train"]) | set(s["val"]) | set(s["test"]) == set(ids)
    assert s["test"] == ids[-5:]


def test_dataset_split_must_partition():
    with pytest.raises(DatasetError):
        Dataset((_scene("a"), _scene("b")), {"train": ["a"], "val": [], "test": []})
    with pytest.raises(DatasetError):
        Dataset((_scene("a"), _scene("b")), {"train": ["a", "b"], "val": [], "test": ["b"]})


def test_city_geometry_dataset(tmp_path):
    save_image(np.full((300, 420, 3), 0.5), tmp_path / "001_lr.png")
    save_image(np.full((870, 1218, 3), 0.5), tmp_path / "001_hr.png")
    (tmp_path / "manifest.json").write_text(json.dumps({"scale": 2.9}))
    ds = load_dataset(tmp_path)
    assert ds.ids == ["001"] and ds.pairs[0].scale == 2.9


def test_empty_directory(tmp_path):
    assert len(load_dataset(tmp_path)) == 0


def test_orphan_names_the_id(tmp_path):
    save_image(np.zeros((4, 4, 3)), tmp_path / "001_lr.png")
    with pytest.raises(DatasetError, match="001"):
        load_dataset(tmp_path)


def test_manifest_scale_mismatch(tmp_path):
    save_dataset(Dataset((_scene("a"),)), tmp_path, scale=2.0)
    (tmp_path / "manifest.json").write_text(json.dumps({"scale": 2.2}))
    with pytest.raises(DatasetError, match="manifest"):
        load_dataset(tmp_path)


def test_malformed_manifest(tmp_path):
    (tmp_path / "manifest.json").write_text("{nope")
    with pytest.raises(DatasetError):
        load_dataset(tmp_path)


@pytest.mark.invariant
def test_dataset_roundtrip_deterministic(tmp_path):
    ds = Dataset(tuple(_scene(f"s{i}", seed=i) for i in (3, 1, 2, 0)))
    save_dataset(ds, tmp_path / "d")
    a, b = load_dataset(tmp_path / "d"), load_dataset(tmp_path / "d")
    assert a.ids == b.ids == ["s0", "s1", "s2", "s3"]
    assert a.splits == b.splits == ds.splits
    for p, q in zip(a.pairs, ds.pairs):
        assert np.abs(p.hr - q.hr).max() <= 1 / 65535
