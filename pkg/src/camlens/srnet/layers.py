"""3x3 same-padding convolution and its adjoint.

Public functions take (N, C, H, W) tensors. The model keeps activations in
(C, N, H, W) order internally so the im2col product is a single GEMM with no
transposes; the ``*_cnhw`` helpers work in that layout.
"""
import numpy as np

from .. import kernels
from ..errors import ValidationError


def _check(x, w, b):
    if x.ndim != 4 or w.ndim != 4 or w.shape[2:] != (3, 3):
        raise ValidationError(f"expected 4-D input and (F_out, F_in, 3, 3) weights, got {x.shape}, {w.shape}")
    if b.shape != (w.shape[0],):
        raise ValidationError(f"bias shape {b.shape} does not match {w.shape[0]} filters")


def conv_forward_cnhw(x, w, b):
    """Returns (y, cols); ``cols`` is kept for the backward pass."""
    C, N, H, W = x.shape
    if w.shape[1] != C:
        raise ValidationError(f"weights expect {w.shape[1]} input channels, got {C}")
    cols = kernels.im2col3x3(np.ascontiguousarray(x)).reshape(C * 9, N * H * W)
    y = w.reshape(w.shape[0], -1) @ cols
    y += b[:, None]
    return y.reshape(w.shape[0], N, H, W), cols


def conv_backward_cnhw(dy, cols, w, need_input_grad=True):
    """Gradients (dx, dw, db) of a conv layer given the upstream gradient ``dy``."""
    F, N, H, W = dy.shape
    g = dy.reshape(F, -1)
    dw = (g @ cols.T).reshape(w.shape)
    db = g.sum(axis=1)
    dx = None
    if need_input_grad:
        dcols = w.reshape(F, -1).T @ g
        dx = kernels.col2im3x3(dcols.reshape(w.shape[1], 9, N, H, W))
    return dx, dw, db


def conv2d_forward(x, w, b):
    """Cross-correlation with a 3x3 kernel and one pixel of zero padding; (N, C, H, W) in and out."""
    x, w, b = np.asarray(x), np.asarray(w), np.asarray(b)
    _check(x, w, b)
    y, _ = conv_forward_cnhw(np.ascontiguousarray(x.transpose(1, 0, 2, 3)), w, b)
    return np.ascontiguousarray(y.transpose(1, 0, 2, 3))


def conv2d_backward(x, w, b, dy):
    """(dx, dw, db) for ``conv2d_forward``; all tensors (N, C, H, W)."""
    x, w, b, dy = (np.asarray(v) for v in (x, w, b, dy))
    _check(x, w, b)
    x_c = np.ascontiguousarray(x.transpose(1, 0, 2, 3))
    _, cols = conv_forward_cnhw(x_c, w, b)
    dx, dw, db = conv_backward_cnhw(np.ascontiguousarray(dy.transpose(1, 0, 2, 3)), cols, w)
    return np.ascontiguousarray(dx.transpose(1, 0, 2, 3)), dw, db
