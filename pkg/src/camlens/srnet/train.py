"""Training under a chosen degradation model, and inference."""
import logging
import math
from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError, ValidationError
from ..image import as_image, clamp
from ..metrics import MetricsReport, average_reports, evaluate_pair, interpolated_baseline
from ..resample import GaussianParams, check_scale, degrade_bicubic, degrade_gaussian, resize_bicubic
from .model import SrModel, mse_loss
from .optim import clip_grad_norm, make_optimizer

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    patch: int = 64
    steps: int = 1000
    learning_rate: float = 1e-4
    seed: int = 0
    optimizer: str = "adam"
    clip: float | None = 1.0
    depth: int = 8
    width: int = 32
    residual: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError("batch_size must be at least 1")
        if self.patch < 16:
            raise ValidationError("patch must be at least 16 pixels")
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        if self.steps < 0 or self.depth < 1 or self.width < 1:
            raise ValidationError("steps, depth and width must be non-negative / positive")


def parse_degradation(spec):
    """Normalize a degradation description to a tag dict.

    Accepts ``"bicubic"``, ``"camera"``, ``"gaussian:K,SIGMA"``, a
    ``GaussianParams`` or an existing tag dict.
    """
    if isinstance(spec, GaussianParams):
        return spec.tag()
    if isinstance(spec, dict):
        spec = dict(spec)
        if spec.get("type") == "gaussian":
            return GaussianParams(spec["k"], spec["sigma"]).tag()
        if spec.get("type") in ("bicubic", "camera"):
            return {"type": spec["type"]}
        raise ValidationError(f"unknown degradation {spec!r}")
    s = str(spec).strip().lower()
    if s in ("bicubic", "camera"):
        return {"type": s}
    if s.startswith("gaussian"):
        try:
            k, sigma = s.split(":", 1)[1].split(",")
            return GaussianParams(int(k), float(sigma)).tag()
        except (IndexError, ValueError):
            raise ValidationError(f"gaussian degradation needs 'gaussian:K,SIGMA', got {spec!r}") from None
    raise ValidationError(f"unknown degradation {spec!r}")


def degraded_input(scene, degradation):
    """LR for ``scene`` under ``degradation``, bicubically interpolated back onto the HR grid."""
    tag = parse_degradation(degradation)
    h, w = scene.hr.shape[:2]
    if tag["type"] == "camera":
        return interpolated_baseline(scene)
    if tag["type"] == "bicubic":
        lr = degrade_bicubic(scene.hr, scene.scale)
    else:
        lr = degrade_gaussian(scene.hr, GaussianParams(tag["k"], tag["sigma"]), scene.scale)
    return resize_bicubic(lr, w, h)


def _cnhw(batch):
    return np.ascontiguousarray(batch.transpose(3, 0, 1, 2))


def train(scenes, degradation, config=TrainConfig(), model=None, log_every=0):
    """Fit a model to (degraded input, HR) patch pairs. Returns (model, per-step losses).

    Patches are cropped at the same location from the HR image and from the
    whole-frame interpolated LR, so the ``camera`` pairs need no per-patch
    resampling.
    """
    scenes = list(scenes)
    if not scenes:
        raise ValidationError("training set is empty")
    tag = parse_degradation(degradation)
    P = config.patch
    inputs, targets = [], []
    for s in scenes:
        if s.hr.shape[0] < P or s.hr.shape[1] < P:
            raise ValidationError(f"scene {s.id} is smaller than the {P}px patch")
        inputs.append(degraded_input(s, tag))
        targets.append(s.hr)
    if model is None:
        model = SrModel.init(scenes[0].hr.shape[2], config.depth, config.width, config.residual, config.seed)
    opt = make_optimizer(config.optimizer, config.learning_rate)
    rng = np.random.default_rng(config.seed)
    dtype = model.dtype
    losses = []
    for step in range(config.steps):
        picks = rng.integers(0, len(scenes), config.batch_size)
        xs, ys = [], []
        for i in picks:
            H, W = targets[i].shape[:2]
            y0, x0 = rng.integers(0, H - P + 1), rng.integers(0, W - P + 1)
            xs.append(inputs[i][y0:y0 + P, x0:x0 + P])
            ys.append(targets[i][y0:y0 + P, x0:x0 + P])
        xb = _cnhw(np.stack(xs).astype(dtype))
        yb = _cnhw(np.stack(ys).astype(dtype))
        out = model.forward_cnhw(xb)
        loss, grad = mse_loss(out, yb)
        if not math.isfinite(loss):
            raise DivergenceError(f"loss became {loss} at step {step}; lower the learning rate or enable clipping")
        grads = model.backward_cnhw(grad)
        norm = clip_grad_norm(grads, config.clip)
        if not math.isfinite(norm):
            raise DivergenceError(f"gradient norm became {norm} at step {step}")
        opt.step(model, grads)
        losses.append(loss)
        if log_every and (step + 1) % log_every == 0:
            log.info("step %d loss %.6g", step + 1, loss)
    return model, losses


def run_model(model, interp, tile=128):
    """Forward an interpolated image through ``model`` (unclamped), tile by tile.

    Each tile carries a halo of ``model.depth`` pixels, the network's receptive
    radius, so tiling does not change any output pixel.
    """
    interp = as_image(interp)
    H, W, C = interp.shape
    halo = model.depth
    out = np.empty((H, W, C))
    for y0 in range(0, H, tile):
        for x0 in range(0, W, tile):
            y1, x1 = min(H, y0 + tile), min(W, x0 + tile)
            ya, yb = max(0, y0 - halo), min(H, y1 + halo)
            xa, xb = max(0, x0 - halo), min(W, x1 + halo)
            block = interp[ya:yb, xa:xb].astype(model.dtype).transpose(2, 0, 1)[:, None]
            res = model.forward_cnhw(np.ascontiguousarray(block), keep_cache=False)[:, 0]
            out[y0:y1, x0:x1] = res[:, y0 - ya:y1 - ya, x0 - xa:x1 - xa].transpose(1, 2, 0)
    return out


def super_resolve(model, lr, scale, tile=128):
    """Bicubic upsampling by ``scale`` followed by the network, clamped to [0, 1]."""
    lr = as_image(lr)
    scale = check_scale(scale)
    h, w = lr.shape[:2]
    up = resize_bicubic(lr, round(scale * w), round(scale * h))
    if tile is None:
        tile = max(up.shape[:2])
    return clamp(run_model(model, up, tile))


def evaluate_model(model, scenes, tile=128):
    """Mean PSNR/SSIM of super-resolved LR against HR; ``model=None`` gives the interpolation baseline."""
    reports = []
    for s in scenes:
        h, w = s.hr.shape[:2]
        if model is None:
            cand = interpolated_baseline(s)
        else:
            cand = clamp(run_model(model, interpolated_baseline(s), tile))
        reports.append(evaluate_pair(s, cand))
    return average_reports(reports), reports
