# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Mirrors camlens._fallback exactly, including summation order."""
import numpy as np
cimport numpy as cnp
from cython cimport floating

cnp.import_array()


def apply_taps(const double[:, :, ::1] src, const cnp.intp_t[:, ::1] idx,
               const double[:, ::1] w):
    """out[a, i, b] = sum_j w[i, j] * src[a, idx[i, j], b], j ascending."""
    cdef Py_ssize_t A = src.shape[0], n_in = src.shape[1], B = src.shape[2]
    cdef Py_ssize_t n_out = idx.shape[0], T = idx.shape[1]
    cdef Py_ssize_t a, i, j, b, k
    cdef double wij
    if w.shape[0] != n_out or w.shape[1] != T:
        raise ValueError("idx and w shapes differ")
    for i in range(n_out):
        for j in range(T):
            if idx[i, j] < 0 or idx[i, j] >= n_in:
                raise IndexError("tap index out of range")
    out = np.zeros((A, n_out, B), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    with nogil:
        for a in range(A):
            for i in range(n_out):
                for j in range(T):
                    wij = w[i, j]
                    k = idx[i, j]
                    for b in range(B):
                        o[a, i, b] = o[a, i, b] + wij * src[a, k, b]
    return out


def im2col3x3(const floating[:, :, :, ::1] x):
    """(C, N, H, W) -> (C, 9, N, H, W) neighborhood stack with zero padding."""
    cdef Py_ssize_t C = x.shape[0], N = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t c, t, n, h, ww, dy, dx, sy, sx, x0, x1
    dtype = np.float32 if floating is float else np.float64
    cols = np.zeros((C, 9, N, H, W), dtype=dtype)
    cdef floating[:, :, :, :, ::1] o = cols
    with nogil:
        for c in range(C):
            for t in range(9):
                dy = t // 3 - 1
                dx = t % 3 - 1
                x0 = 1 if dx < 0 else 0
                x1 = W - 1 if dx > 0 else W
                for n in range(N):
                    for h in range(H):
                        sy = h + dy
                        if sy < 0 or sy >= H:
                            continue
                        for ww in range(x0, x1):
                            o[c, t, n, h, ww] = x[c, n, sy, ww + dx]
    return cols


def col2im3x3(const floating[:, :, :, :, ::1] cols):
    """Adjoint of im2col3x3: scatter-add (C, 9, N, H, W) back to (C, N, H, W)."""
    cdef Py_ssize_t C = cols.shape[0], N = cols.shape[2], H = cols.shape[3], W = cols.shape[4]
    cdef Py_ssize_t c, t, n, h, ww, dy, dx, sy, x0, x1
    if cols.shape[1] != 9:
        raise ValueError("expected 9 taps")
    dtype = np.float32 if floating is float else np.float64
    out = np.zeros((C, N, H, W), dtype=dtype)
    cdef floating[:, :, :, ::1] o = out
    with nogil:
        for c in range(C):
            for t in range(9):
                dy = t // 3 - 1
                dx = t % 3 - 1
                x0 = 1 if dx < 0 else 0
                x1 = W - 1 if dx > 0 else W
                for n in range(N):
                    for h in range(H):
                        sy = h + dy
                        if sy < 0 or sy >= H:
                            continue
                        for ww in range(x0, x1):
                            o[c, n, sy, ww + dx] = o[c, n, sy, ww + dx] + cols[c, t, n, h, ww]
    return out
