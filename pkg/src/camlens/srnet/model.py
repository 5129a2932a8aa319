"""Residual CNN super-resolver operating on the bicubically interpolated LR."""
import os

import numpy as np

from ..errors import DivergenceError, StaleCacheError, ValidationError
from .layers import conv_backward_cnhw, conv_forward_cnhw

DEBUG = os.environ.get("CAMLENS_DEBUG", "") == "1"


def mse_loss(pred, target):
    """Mean squared error and its gradient with respect to ``pred``."""
    pred, target = np.asarray(pred), np.asarray(target)
    if pred.shape != target.shape:
        raise ValidationError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff.astype(np.float64) ** 2))
    grad = (2.0 / diff.size) * diff
    return loss, grad


class SrModel:
    """Stack of 3x3 convolutions with ReLU between them.

    ``layers`` is a list of (weights, bias) with weights shaped
    (F_out, F_in, 3, 3). With ``residual`` the network predicts a correction
    added to its input.
    """

    def __init__(self, layers, residual=True):
        if not layers:
            raise ValidationError("model needs at least one layer")
        self.layers = [(np.ascontiguousarray(w), np.ascontiguousarray(b)) for w, b in layers]
        for (w0, _), (w1, _) in zip(self.layers, self.layers[1:]):
            if w1.shape[1] != w0.shape[0]:
                raise ValidationError("consecutive layer widths do not chain")
        if self.layers[-1][0].shape[0] != self.layers[0][0].shape[1]:
            raise ValidationError("last layer must map back to the image channel count")
        self.residual = bool(residual)
        self._version = 0
        self._cache = None

    @classmethod
    def init(cls, channels=3, depth=8, width=32, residual=True, seed=0, dtype=np.float32,
             zero_last=True):
        """Fan-in scaled normal weights, zero biases; the last layer is zero when ``zero_last``."""
        rng = np.random.default_rng(seed)
        widths = [channels] + [width] * (depth - 1) + [channels]
        layers = []
        for i in range(depth):
            fan_in = widths[i] * 9
            shape = (widths[i + 1], widths[i], 3, 3)
            if i == depth - 1 and zero_last:
                w = np.zeros(shape)
            else:
                w = rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)
            layers.append((w.astype(dtype), np.zeros(widths[i + 1], dtype)))
        return cls(layers, residual)

    @property
    def depth(self):
        return len(self.layers)

    @property
    def width(self):
        return self.layers[0][0].shape[0]

    @property
    def channels(self):
        return self.layers[0][0].shape[1]

    @property
    def dtype(self):
        return self.layers[0][0].dtype

    def params(self):
        """Flat list [w0, b0, w1, b1, ...] of the live parameter arrays."""
        return [a for wb in self.layers for a in wb]

    def n_params(self):
        return sum(a.size for a in self.params())

    def astype(self, dtype):
        return SrModel([(w.astype(dtype), b.astype(dtype)) for w, b in self.layers], self.residual)

    def copy(self):
        return self.astype(self.dtype)

    def mark_updated(self):
        """Call after changing parameters in place; invalidates cached activations."""
        self._version += 1
        self._cache = None

    def forward(self, x, keep_cache=True):
        """Forward pass on an (N, C, H, W) tensor."""
        x = np.asarray(x)
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ValidationError(f"expected (N, {self.channels}, H, W) input, got {x.shape}")
        out = self.forward_cnhw(np.ascontiguousarray(x.transpose(1, 0, 2, 3), dtype=self.dtype), keep_cache)
        return np.ascontiguousarray(out.transpose(1, 0, 2, 3))

    def forward_cnhw(self, x, keep_cache=True):
        a = x
        cols_list, masks = [], []
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            z, cols = conv_forward_cnhw(a, w, b)
            if keep_cache:
                cols_list.append(cols)
            if i < last:
                mask = z > 0
                if keep_cache:
                    masks.append(mask)
                a = z * mask
            else:
                a = z
            if DEBUG and not np.all(np.isfinite(a)):
                raise DivergenceError(f"non-finite activation after layer {i}")
        out = a + x if self.residual else a
        self._cache = (self._version, cols_list, masks, x.shape) if keep_cache else None
        return out

    def backward(self, grad_out, need_input_grad=False):
        """Parameter gradients [dw0, db0, ...] for the cached forward pass.

        With ``need_input_grad`` returns (param_grads, input_grad) instead.
        """
        g = np.asarray(grad_out)
        res = self.backward_cnhw(np.ascontiguousarray(g.transpose(1, 0, 2, 3)), need_input_grad)
        if need_input_grad:
            grads, dx = res
            return grads, np.ascontiguousarray(dx.transpose(1, 0, 2, 3))
        return res

    def backward_cnhw(self, grad_out, need_input_grad=False):
        if self._cache is None or self._cache[0] != self._version:
            raise StaleCacheError("backward needs a forward pass on the current parameters")
        _, cols_list, masks, in_shape = self._cache
        if grad_out.shape[0] != self.channels or grad_out.shape[1:] != in_shape[1:]:
            raise ValidationError(f"gradient shape {grad_out.shape} does not match the forward input")
        grads = [None] * (2 * len(self.layers))
        g = grad_out.astype(self.dtype, copy=False)
        for i in range(len(self.layers) - 1, -1, -1):
            w, _ = self.layers[i]
            want_dx = i > 0 or need_input_grad
            dx, dw, db = conv_backward_cnhw(g, cols_list[i], w, want_dx)
            grads[2 * i], grads[2 * i + 1] = dw, db
            if i > 0:
                g = dx * masks[i - 1]
        if need_input_grad:
            if self.residual:
                dx = dx + grad_out  # skip connection passes the gradient straight through
            return grads, dx
        return grads
