"""Pure-numpy versions of the compiled kernels.

Same contracts and the same per-element summation order as ``_ckernels``.
"""
import numpy as np


def apply_taps(src, idx, w):
    """out[a, i, b] = sum_j w[i, j] * src[a, idx[i, j], b], j ascending."""
    src = np.ascontiguousarray(src, dtype=np.float64)
    idx = np.asarray(idx, dtype=np.intp)
    w = np.asarray(w, dtype=np.float64)
    if idx.shape != w.shape:
        raise ValueError("idx and w shapes differ")
    if idx.size and (idx.min() < 0 or idx.max() >= src.shape[1]):
        raise IndexError("tap index out of range")
    out = np.zeros((src.shape[0], idx.shape[0], src.shape[2]))
    for j in range(idx.shape[1]):
        out += w[None, :, j, None] * src[:, idx[:, j], :]
    return out


def _tap_slices(t, H, W):
    dy, dx = t // 3 - 1, t % 3 - 1
    dst = (slice(max(0, -dy), H - max(0, dy)), slice(max(0, -dx), W - max(0, dx)))
    src = (slice(max(0, dy), H + min(0, dy)), slice(max(0, dx), W + min(0, dx)))
    return dst, src


def im2col3x3(x):
    """(C, N, H, W) -> (C, 9, N, H, W) neighborhood stack with zero padding."""
    C, N, H, W = x.shape
    cols = np.zeros((C, 9, N, H, W), dtype=x.dtype)
    for t in range(9):
        (dy, dx), (sy, sx) = _tap_slices(t, H, W)
        cols[:, t, :, dy, dx] = x[:, :, sy, sx]
    return cols


def col2im3x3(cols):
    """Adjoint of im2col3x3: scatter-add (C, 9, N, H, W) back to (C, N, H, W)."""
    C, T, N, H, W = cols.shape
    if T != 9:
        raise ValueError("expected 9 taps")
    out = np.zeros((C, N, H, W), dtype=cols.dtype)
    for t in range(9):
        (dy, dx), (sy, sx) = _tap_slices(t, H, W)
        out[:, :, sy, sx] += cols[:, t, :, dy, dx]
    return out
