"""Synthetic paired datasets with a known (hidden) degradation chain.

HR scenes are procedural textures: colour gradients, checkerboard patches,
strokes and text. The LR side is produced by

    shift (HR grid) -> blur + downsample -> colour map -> DC bias -> noise

and everything needed to check a recovery is written to ``truth.json``.
"""
import json
import string
from dataclasses import asdict, dataclass, field
from pathlib import Path

import cv2
import numpy as np

from ._atomic import write_text_atomic
from .dataset import Dataset, PairedScene, save_dataset
from .errors import ValidationError
from .image import add_bias, clamp, quantize, save_image
from .resample import (GaussianParams, check_scale, degrade_bicubic, degrade_gaussian,
                       shift_image)


@dataclass(frozen=True)
class SynthSpec:
    n_scenes: int = 8
    hr_size: tuple = (232, 174)
    scale: float = 2.9
    gauss: tuple | None = None  # (k, sigma); None means bicubic downsampling
    blur_first: bool = True
    phase: int = 0  # decimation phase of the Gaussian chain
    shift: tuple = (0.0, 0.0)
    bias: float = 0.0
    color: tuple | None = None  # forward map coefficients, constant term first
    noise: float = 0.0
    seed: int = 0
    checker_grid: tuple | None = None  # (rows, cols) to also emit a colour checker
    channels: int = 3
    splits: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_scenes < 0:
            raise ValidationError("n_scenes must be non-negative")
        check_scale(self.scale)
        w, h = self.hr_size
        lw, lh = round(w / self.scale), round(h / self.scale)
        if lw < 12 or lh < 12:
            raise ValidationError(f"HR size {w}x{h} is too small for scale {self.scale}")
        if self.channels not in (1, 3):
            raise ValidationError("channels must be 1 or 3")

    def gaussian(self):
        return GaussianParams(*self.gauss) if self.gauss else None


def textured_image(rng, width, height, channels=3):
    """Detail-rich test scene with mean close to 0.5 and samples in [0.05, 0.95]."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float32)
    img = np.empty((height, width, 3), np.float32)
    for c in range(3):
        a, b, d = rng.uniform(0.2, 0.8), rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)
        img[:, :, c] = a + b * xx / width + d * yy / height
    for _ in range(3):
        x0, y0 = rng.integers(0, width - 8), rng.integers(0, height - 8)
        x1 = min(width, x0 + rng.integers(width // 6, width // 2))
        y1 = min(height, y0 + rng.integers(height // 6, height // 2))
        cell = int(rng.integers(3, 12))
        c0, c1 = rng.uniform(0, 1, 3), rng.uniform(0, 1, 3)
        parity = ((xx[y0:y1, x0:x1] // cell + yy[y0:y1, x0:x1] // cell) % 2)[:, :, None]
        img[y0:y1, x0:x1] = np.where(parity > 0, c1, c0)
    for _ in range(14):
        p0 = (int(rng.integers(0, width)), int(rng.integers(0, height)))
        p1 = (int(rng.integers(0, width)), int(rng.integers(0, height)))
        cv2.line(img, p0, p1, tuple(float(v) for v in rng.uniform(0, 1, 3)),
                 int(rng.integers(1, 4)), cv2.LINE_AA)
    letters = string.ascii_letters + string.digits
    for _ in range(5):
        text = "".join(rng.choice(list(letters), size=int(rng.integers(3, 8))))
        org = (int(rng.integers(0, width - 20)), int(rng.integers(12, height)))
        mask = np.zeros((height, width), np.uint8)  # putText only draws on 8-bit images
        cv2.putText(mask, text, org, cv2.FONT_HERSHEY_SIMPLEX, float(rng.uniform(0.3, 0.9)),
                    255, int(rng.integers(1, 3)), cv2.LINE_AA)
        alpha = (mask.astype(np.float32) / 255)[:, :, None]
        img = img * (1 - alpha) + rng.uniform(0, 1, 3).astype(np.float32) * alpha
    img = np.clip(img.astype(np.float64), 0, 1)
    img = 0.05 + 0.9 * img
    img = np.clip(img + (0.5 - img.mean()), 0.05, 0.95)
    if channels == 1:
        img = img.mean(axis=2, keepdims=True)
    return img


def checker_image(rng, width, height, rows, cols, channels=3):
    colors = rng.uniform(0.1, 0.9, (rows, cols, 3))
    ys = (np.arange(height) * rows // height)
    xs = (np.arange(width) * cols // width)
    img = colors[ys[:, None], xs[None, :]]
    return img.mean(axis=2, keepdims=True) if channels == 1 else img


def bandlimited_image(rng, size, scale, band=(0.5, 0.9), waves=12, channels=3):
    """Sum of random plane waves below the Nyquist limit of the LR grid.

    Frequencies are drawn from ``band`` as a fraction of the LR Nyquist rate,
    so bicubic decimation by ``scale`` does not alias and the detail lost by
    down/up resampling is a fixed linear filter of the input. Used as a
    learnable smoke dataset for the network.
    """
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    nyquist = 0.5 / scale
    img = np.zeros((size, size, channels))
    for c in range(channels):
        for _ in range(waves):
            f = rng.uniform(*band) * nyquist
            theta, phase = rng.uniform(0.0, 2 * np.pi, 2)
            img[:, :, c] += np.cos(2 * np.pi * f * (x * np.cos(theta) + y * np.sin(theta)) + phase)
    img = 0.5 + 0.15 * img / img.std()
    return np.clip(img, 0.0, 1.0)


def _poly(img, coeffs):
    acc = np.full_like(img, coeffs[-1])
    for c in reversed(coeffs[:-1]):
        acc = acc * img + c
    return clamp(acc)


def hidden_chain(hr, spec, rng):
    """Apply the configured hidden capture effects to one HR image."""
    out = hr
    if any(spec.shift):
        out = shift_image(out, *spec.shift)
    g = spec.gaussian()
    out = degrade_gaussian(out, g, spec.scale, spec.blur_first, spec.phase) if g else degrade_bicubic(out, spec.scale)
    if spec.color:
        out = _poly(out, tuple(spec.color))
    if spec.bias:
        out = add_bias(out, spec.bias)
    if spec.noise > 0:
        out = clamp(out + rng.normal(0, spec.noise, out.shape))
    return quantize(out, 16)


def synthesize(spec):
    """Build the dataset in memory. Returns (Dataset, checker or None, truth dict).

    ``checker`` is an ``(lr_image, hr_image)`` pair passed through the same chain.
    """
    rng = np.random.default_rng(spec.seed)
    w, h = spec.hr_size
    pairs = []
    for i in range(spec.n_scenes):
        hr = quantize(textured_image(rng, w, h, spec.channels), 16)
        lr = hidden_chain(hr, spec, rng)
        pairs.append(PairedScene(f"{i:03d}", lr, hr, spec.scale))
    checker = None
    if spec.checker_grid:
        rows, cols = spec.checker_grid
        chr_ = quantize(checker_image(rng, w, h, rows, cols, spec.channels), 16)
        checker = (hidden_chain(chr_, spec, rng), chr_)
    truth = {"spec": _jsonable(asdict(spec))}
    return Dataset(tuple(pairs), dict(spec.splits)), checker, truth


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_synth(spec, out_dir):
    out_dir = Path(out_dir)
    dataset, checker, truth = synthesize(spec)
    save_dataset(dataset, out_dir, scale=spec.scale, bit_depth=16)
    if checker is not None:
        (out_dir / "checker").mkdir(parents=True, exist_ok=True)
        save_image(checker[0], out_dir / "checker" / "lr.png", 16)
        save_image(checker[1], out_dir / "checker" / "hr.png", 16)
    write_text_atomic(out_dir / "truth.json", json.dumps(truth, indent=2, sort_keys=True) + "\n")
    return dataset
