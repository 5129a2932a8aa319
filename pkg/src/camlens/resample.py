"""Bicubic resampling, Gaussian blur, decimation and the synthetic degradations.

All resampling is separable: a horizontal pass then a vertical pass, each a
gather-and-weight over a precomputed tap table (``kernels.apply_taps``).
Samples beyond the border are replicated.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ValidationError
from .image import as_image, clamp

BICUBIC_A = -0.5
DSLR_SCALE = 2.9
PHONE_SCALE = 2.4


@dataclass(frozen=True)
class GaussianParams:
    k: int
    sigma: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1 or self.k % 2 == 0:
            raise ValidationError(f"Gaussian kernel size must be a positive odd integer, got {self.k}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValidationError(f"Gaussian sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "sigma", float(self.sigma))

    def tag(self):
        return {"type": "gaussian", "k": self.k, "sigma": self.sigma}


# matched (k, sigma) presets for the x2.9 DSLR data
GAUSSIAN_PRESETS = {"k5": GaussianParams(5, 2.65), "k7": GaussianParams(7, 1.55)}


def check_scale(scale):
    scale = float(scale)
    if not (math.isfinite(scale) and scale > 1):
        raise ValidationError(f"scale factor must be a finite ratio > 1, got {scale}")
    return scale


def cubic_weight(t, a=BICUBIC_A):
    """Piecewise-cubic interpolation kernel; works elementwise on arrays."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    t2, t3 = t * t, t * t * t
    near = (a + 2) * t3 - (a + 3) * t2 + 1
    far = a * t3 - 5 * a * t2 + 8 * a * t - 4 * a
    out = np.where(t <= 1, near, np.where(t < 2, far, 0.0))
    return float(out) if out.ndim == 0 else out


def cubic_taps(coords, n_in, a=BICUBIC_A):
    """Tap table (indices, weights), each (len(coords), 4), sampling at ``coords``."""
    coords = np.asarray(coords, dtype=np.float64)
    base = np.floor(coords)
    t = coords - base
    offsets = np.arange(-1, 3)
    idx = np.clip(base.astype(np.intp)[:, None] + offsets, 0, n_in - 1)
    w = cubic_weight(t[:, None] - offsets, a)
    return np.ascontiguousarray(idx), np.ascontiguousarray(w)


def center_coords(n_in, n_out):
    """Source coordinate of each output pixel centre."""
    return (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5


def separable(img, taps_x, taps_y):
    """Horizontal pass with ``taps_x`` then vertical pass with ``taps_y``. ``None`` skips a pass."""
    out = np.ascontiguousarray(img, dtype=np.float64)
    H, W, C = out.shape
    if taps_x is not None:
        out = kernels.apply_taps(out, *taps_x)
        W = out.shape[1]
    if taps_y is not None:
        out = kernels.apply_taps(out.reshape(1, H, W * C), *taps_y)
        H = out.shape[1]
    return out.reshape(H, W, C)


def resize_bicubic(img, out_w, out_h, a=BICUBIC_A):
    img = as_image(img)
    out_w, out_h = int(out_w), int(out_h)
    if out_w < 1 or out_h < 1:
        raise ValidationError(f"output size must be at least 1x1, got {out_w}x{out_h}")
    H, W = img.shape[:2]
    tx = cubic_taps(center_coords(W, out_w), W, a)
    ty = cubic_taps(center_coords(H, out_h), H, a)
    return clamp(separable(img, tx, ty))


def shift_image(img, dx, dy, a=BICUBIC_A):
    """Translate content by (dx, dy): output(x, y) samples input at (x - dx, y - dy)."""
    img = as_image(img)
    H, W = img.shape[:2]
    if abs(dx) >= min(W, H) / 2 or abs(dy) >= min(W, H) / 2:
        raise ValidationError(f"shift ({dx}, {dy}) too large for a {W}x{H} image")
    tx = cubic_taps(np.arange(W) - dx, W, a)
    ty = cubic_taps(np.arange(H) - dy, H, a)
    return clamp(separable(img, tx, ty))


def degraded_size(w, h, scale):
    return round(w / scale), round(h / scale)


def degrade_bicubic(img, scale):
    img = as_image(img)
    scale = check_scale(scale)
    ow, oh = degraded_size(img.shape[1], img.shape[0], scale)
    if ow < 1 or oh < 1:
        raise ValidationError(f"{img.shape[1]}x{img.shape[0]} image is too small for scale {scale}")
    return resize_bicubic(img, ow, oh)


def gaussian_kernel(params):
    """Normalized 1-D Gaussian taps of length k."""
    c = (params.k - 1) / 2
    x = np.arange(params.k) - c
    g = np.exp(-(x * x) / (2 * params.sigma ** 2))
    return g / g.sum()


def gaussian_blur(img, params):
    """Separable k x k Gaussian blur with replicated borders."""
    img = as_image(img)
    if params.k == 1:
        return img.copy()
    g = gaussian_kernel(params)
    c = params.k // 2

    def taps(n):
        idx = np.clip(np.arange(n)[:, None] + np.arange(-c, c + 1), 0, n - 1)
        return np.ascontiguousarray(idx), np.ascontiguousarray(np.broadcast_to(g, idx.shape))

    H, W = img.shape[:2]
    return clamp(separable(img, taps(W), taps(H)))


def decimate(img, factor, phase=0):
    """Keep every ``factor``-th sample starting at ``phase``: ceil((dim - phase) / factor) per axis."""
    img = as_image(img)
    factor, phase = int(factor), int(phase)
    if factor < 1 or not 0 <= phase < factor:
        raise ValidationError(f"need factor >= 1 and 0 <= phase < factor, got {factor}, {phase}")
    if phase >= img.shape[0] or phase >= img.shape[1]:
        raise ValidationError("decimation leaves an empty image")
    return img[phase::factor, phase::factor].copy()


def _resize_then_decimate(img, out_w, out_h, factor, phase):
    """decimate(resize_bicubic(img, out_w, out_h), factor, phase) without computing dropped samples."""
    H, W = img.shape[:2]
    if phase >= out_w or phase >= out_h:
        raise ValidationError("decimation leaves an empty image")
    ix, wx = cubic_taps(center_coords(W, out_w), W)
    iy, wy = cubic_taps(center_coords(H, out_h), H)
    keep_x, keep_y = slice(phase, None, factor), slice(phase, None, factor)
    tx = (np.ascontiguousarray(ix[keep_x]), np.ascontiguousarray(wx[keep_x]))
    ty = (np.ascontiguousarray(iy[keep_y]), np.ascontiguousarray(wy[keep_y]))
    return clamp(separable(img, tx, ty))


def degrade_gaussian(img, params, scale, blur_first=True, phase=0):
    """Gaussian blur plus decimation at a possibly non-integer scale.

    The image is resampled by ceil(scale)/scale and then decimated by ceil(scale)
    (for 2.9: x3/2.9 then every third pixel). ``blur_first`` blurs at the input
    resolution; otherwise the blur runs after the resampling.
    """
    img = as_image(img)
    scale = check_scale(scale)
    factor = math.ceil(scale - 1e-9)
    H, W = img.shape[:2]
    iw, ih = round(W * factor / scale), round(H * factor / scale)
    if iw < 1 or ih < 1 or -(-iw // factor) < 1:
        raise ValidationError(f"{W}x{H} image is too small for scale {scale}")
    if blur_first:
        return _resize_then_decimate(gaussian_blur(img, params), iw, ih, factor, phase)
    up = resize_bicubic(img, iw, ih)
    return decimate(gaussian_blur(up, params), factor, phase)
