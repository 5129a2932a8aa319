"""Raster representation and pixel-level utilities.

An image is a float64 numpy array of shape ``(height, width, channels)`` with
``channels`` in {1, 3} and samples in [0, 1]. Sample (x, y, c) is
``img[y, x, c]``. Functions never modify their inputs.
"""
from pathlib import Path

import cv2
import numpy as np

from ._atomic import write_bytes_atomic
from .errors import CamlensIOError, ImageDecodeError, ValidationError

try:  # decode failures are reported as exceptions, not log lines
    cv2.utils.logging.setLogLevel(cv2.utils.logging.LOG_LEVEL_SILENT)
except AttributeError:
    pass

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def as_image(arr, *, copy=False):
    """Validate ``arr`` and return it as a (H, W, C) float64 image.

    2-D input is treated as single-channel.
    """
    img = np.array(arr, dtype=np.float64, copy=copy) if copy else np.asarray(arr, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValidationError(f"image must be (H, W) or (H, W, 1|3), got shape {np.shape(arr)}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValidationError(f"image has empty dimensions {img.shape[:2]}")
    if not np.all(np.isfinite(img)):
        raise ValidationError("image contains non-finite samples")
    return img


def clamp(img):
    return np.clip(img, 0.0, 1.0)


def size_of(img):
    """(width, height) of an image."""
    return img.shape[1], img.shape[0]


def load_image(path):
    path = Path(path)
    try:
        raw = np.fromfile(path, dtype=np.uint8)
    except OSError as exc:
        raise CamlensIOError(f"cannot read {path}: {exc}") from exc
    data = cv2.imdecode(raw, cv2.IMREAD_UNCHANGED) if raw.size else None
    if data is None:
        raise ImageDecodeError(f"{path}: not a decodable raster image")
    if data.dtype == np.uint8:
        scale = 255.0
    elif data.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ImageDecodeError(f"{path}: unsupported sample type {data.dtype}")
    if data.ndim == 3:
        if data.shape[2] != 3:
            raise ImageDecodeError(f"{path}: unsupported channel count {data.shape[2]}")
        data = data[:, :, ::-1]  # BGR -> RGB
    return as_image(data.astype(np.float64) / scale)


# Half-way cases are rounded up; the slack absorbs binary representation error
# so that e.g. 0.3 * 255 (76.4999...) lands on 77 as it would in decimal.
_HALF_SLACK = 1e-6


def _levels(img, peak):
    return np.floor(clamp(img) * peak + (0.5 + _HALF_SLACK))


def encode_png(img, bit_depth=8):
    if bit_depth not in (8, 16):
        raise ValidationError(f"bit depth must be 8 or 16, got {bit_depth}")
    img = as_image(img)
    peak = (1 << bit_depth) - 1
    q = _levels(img, peak).astype(np.uint8 if bit_depth == 8 else np.uint16)
    q = q[:, :, 0] if q.shape[2] == 1 else q[:, :, ::-1]
    ok, buf = cv2.imencode(".png", np.ascontiguousarray(q))
    if not ok:
        raise CamlensIOError("PNG encoding failed")
    return buf.tobytes()


def save_image(img, path, bit_depth=8):
    """Quantize to round-half-up(v * (2**depth - 1)) and write a PNG atomically."""
    write_bytes_atomic(path, encode_png(img, bit_depth))


def quantize(img, bit_depth=16):
    """Snap samples to the grid ``save_image`` would store."""
    peak = (1 << bit_depth) - 1
    return _levels(img, peak) / peak


def to_luminance(img):
    """BT.601 luma for RGB input; single-channel input is returned as is."""
    img = as_image(img)
    if img.shape[2] == 1:
        return img
    return (img @ LUMA_WEIGHTS)[:, :, None]


def mean_intensity(img):
    return float(np.mean(as_image(img)))


def add_bias(img, bias):
    return clamp(as_image(img) + bias)


def crop(img, x0, y0, w, h):
    img = as_image(img)
    H, W = img.shape[:2]
    if w < 1 or h < 1 or x0 < 0 or y0 < 0 or x0 + w > W or y0 + h > H:
        raise ValidationError(f"crop rectangle ({x0}, {y0}, {w}, {h}) outside {W}x{H} image")
    return img[y0:y0 + h, x0:x0 + w].copy()
