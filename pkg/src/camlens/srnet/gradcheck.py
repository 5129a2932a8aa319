"""Central finite-difference check of the model's analytic gradients."""
import numpy as np

from .model import SrModel, mse_loss


def _loss(model, x, target):
    out = model.forward(x, keep_cache=False)
    return mse_loss(out, target)[0]


def gradient_errors(model, x, target, h=1e-6):
    """(analytic, numeric) pairs for every parameter entry; use a float64 model."""
    out = model.forward(x)
    _, g = mse_loss(out, target)
    analytic = model.backward(g)
    pairs = []
    for p, a in zip(model.params(), analytic):
        flat, aflat = p.reshape(-1), a.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = _loss(model, x, target)
            flat[i] = old - h
            down = _loss(model, x, target)
            flat[i] = old
            pairs.append((float(aflat[i]), (up - down) / (2 * h)))
    model.mark_updated()
    return np.array(pairs)


def check_gradients(model, x, target, rtol=1e-4, atol=1e-6, h=1e-6):
    """True when every parameter gradient matches its finite difference.

    An entry passes if |analytic - numeric| <= max(rtol * max(|analytic|, |numeric|), atol).
    """
    pairs = gradient_errors(model, x, target, h)
    a, n = pairs[:, 0], pairs[:, 1]
    bound = np.maximum(rtol * np.maximum(np.abs(a), np.abs(n)), atol)
    return bool(np.all(np.abs(a - n) <= bound)), pairs


def random_instance(rng, channels=3, width=4, depth=2, size=8, batch=2):
    """Random float64 model (no zero layer) with a random input/target pair."""
    model = SrModel.init(channels, depth, width, residual=True, seed=int(rng.integers(1 << 31)),
                         dtype=np.float64, zero_last=False)
    for _, b in model.layers:
        b[:] = rng.normal(0, 0.1, b.shape)
    x = rng.random((batch, channels, size, size))
    target = rng.random((batch, channels, size, size))
    return model, x, target
