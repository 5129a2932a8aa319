"""Full-reference quality metrics: PSNR and single-scale SSIM."""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ValidationError
from .image import as_image, to_luminance
from .resample import resize_bicubic

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
K1, K2 = 0.01, 0.03


def _pair(a, b):
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise ValidationError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b):
    a, b = _pair(a, b)
    d = a - b
    return float(np.mean(d * d))


def psnr(a, b, peak=1.0, luminance=False):
    """PSNR in dB over all samples and channels; ``inf`` when the images are identical."""
    a, b = _pair(a, b)
    if luminance:
        a, b = to_luminance(a), to_luminance(b)
    err = mse(a, b)
    if err == 0:
        return math.inf
    return 10 * math.log10(peak * peak / err)


def _window():
    x = np.arange(SSIM_WINDOW) - (SSIM_WINDOW - 1) / 2
    g = np.exp(-(x * x) / (2 * SSIM_SIGMA ** 2))
    return g / g.sum()


def _valid_filter(stack):
    """Gaussian-weighted means over every fully-inside 11x11 window of a (H, W, K) stack."""
    H, W = stack.shape[:2]
    g = _window()

    def taps(n):
        idx = np.arange(n - SSIM_WINDOW + 1)[:, None] + np.arange(SSIM_WINDOW)
        return np.ascontiguousarray(idx), np.ascontiguousarray(np.broadcast_to(g, idx.shape))

    out = np.ascontiguousarray(stack)
    K = out.shape[2]
    out = kernels.apply_taps(out, *taps(W))
    Wv = out.shape[1]
    out = kernels.apply_taps(out.reshape(1, H, Wv * K), *taps(H))
    return out.reshape(-1, Wv, K)


def ssim_maps(a, b, peak=1.0):
    """Luminance and contrast-structure maps of two single-channel images.

    SSIM is the mean of their product.
    """
    a, b = _pair(a, b)
    if a.shape[2] != 1:
        raise ValidationError("ssim_maps expects single-channel images")
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValidationError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    x, y = a[:, :, 0], b[:, :, 0]
    m = _valid_filter(np.stack([x, y, x * x, y * y, x * y], axis=2))
    mx, my = m[..., 0], m[..., 1]
    vx = m[..., 2] - mx * mx
    vy = m[..., 3] - my * my
    cov = m[..., 4] - mx * my
    c1, c2 = (K1 * peak) ** 2, (K2 * peak) ** 2
    lum = (2 * mx * my + c1) / (mx * mx + my * my + c1)
    cs = (2 * cov + c2) / (vx + vy + c2)
    return lum, cs


def ssim(a, b, peak=1.0, luminance=True):
    """Mean SSIM over all valid window positions.

    RGB input is reduced to BT.601 luma unless ``luminance`` is False, in
    which case the per-channel SSIM values are averaged.
    """
    a, b = _pair(a, b)
    if luminance or a.shape[2] == 1:
        lum, cs = ssim_maps(to_luminance(a), to_luminance(b), peak)
        return float(np.mean(lum * cs))
    vals = []
    for c in range(a.shape[2]):
        lum, cs = ssim_maps(a[:, :, c:c + 1], b[:, :, c:c + 1], peak)
        vals.append(float(np.mean(lum * cs)))
    return float(np.mean(vals))


def format_db(value):
    return "inf" if math.isinf(value) else value


@dataclass(frozen=True)
class MetricsReport:
    psnr: float
    ssim: float

    def to_json(self):
        return {"psnr_db": format_db(self.psnr), "ssim": self.ssim}


def evaluate(candidate, reference, luminance_psnr=False):
    return MetricsReport(psnr(candidate, reference, luminance=luminance_psnr), ssim(candidate, reference))


def interpolated_baseline(scene):
    """Bicubic upsampling of the stored LR to the HR grid."""
    h, w = scene.hr.shape[:2]
    return resize_bicubic(scene.lr, w, h)


def evaluate_pair(scene, candidate, luminance_psnr=False):
    candidate = as_image(candidate)
    if candidate.shape != scene.hr.shape:
        raise ValidationError(f"candidate shape {candidate.shape} != HR shape {scene.hr.shape}")
    return evaluate(candidate, scene.hr, luminance_psnr)


def average_reports(reports):
    reports = list(reports)
    if not reports:
        raise ValidationError("no reports to average")
    return MetricsReport(float(np.mean([r.psnr for r in reports])), float(np.mean([r.ssim for r in reports])))
