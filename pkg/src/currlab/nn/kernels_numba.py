"""Numba-jitted convolution / pooling kernels (default backend).

Same contracts as kernels_numpy; loop-based instead of im2col, so
floating-point summation order differs between the two backends. Inner
loops run over contiguous columns with the padding handled by hoisted
bounds, which lets numba vectorize them.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def conv2d_forward(x, w, b):
    B, Ci, H, W = x.shape
    Co = w.shape[0]
    k = w.shape[-1]
    p = k // 2
    y = np.empty((B, Co, H, W), dtype=x.dtype)
    for n in range(B):
        for o in range(Co):
            for r in range(H):
                for c in range(W):
                    y[n, o, r, c] = b[o]
            for ci in range(Ci):
                for i in range(k):
                    r0 = max(0, p - i)
                    r1 = H - max(0, i - p)
                    for j in range(k):
                        c0 = max(0, p - j)
                        c1 = W - max(0, j - p)
                        wv = w[o, ci, i, j]
                        for r in range(r0, r1):
                            rr = r + i - p
                            off = j - p
                            for c in range(c0, c1):
                                y[n, o, r, c] += x[n, ci, rr, c + off] * wv
    return y


@njit(cache=True, fastmath=True)
def conv2d_backward(x, w, dy):
    B, Ci, H, W = x.shape
    Co = w.shape[0]
    k = w.shape[-1]
    p = k // 2
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    db = np.zeros(Co, dtype=x.dtype)
    for n in range(B):
        for o in range(Co):
            s = 0.0
            for r in range(H):
                for c in range(W):
                    s += dy[n, o, r, c]
            db[o] += s
            for ci in range(Ci):
                for i in range(k):
                    r0 = max(0, p - i)
                    r1 = H - max(0, i - p)
                    for j in range(k):
                        c0 = max(0, p - j)
                        c1 = W - max(0, j - p)
                        off = j - p
                        wv = w[o, ci, i, j]
                        acc = 0.0
                        for r in range(r0, r1):
                            rr = r + i - p
                            for c in range(c0, c1):
                                g = dy[n, o, r, c]
                                acc += x[n, ci, rr, c + off] * g
                                dx[n, ci, rr, c + off] += wv * g
                        dw[o, ci, i, j] += acc
    return dx, dw, db


@njit(cache=True)
def maxpool2_forward(x):
    B, C, H, W = x.shape
    Ho, Wo = H // 2, W // 2
    y = np.empty((B, C, Ho, Wo), dtype=x.dtype)
    arg = np.empty((B, C, Ho, Wo), dtype=np.int64)
    for n in range(B):
        for c in range(C):
            for q in range(Ho):
                for r in range(Wo):
                    best = x[n, c, 2 * q, 2 * r]
                    bi = 0
                    for a in range(1, 4):
                        v = x[n, c, 2 * q + a // 2, 2 * r + a % 2]
                        if v > best:  # strict: ties keep the first cell
                            best = v
                            bi = a
                    y[n, c, q, r] = best
                    arg[n, c, q, r] = bi
    return y, arg


@njit(cache=True)
def maxpool2_backward(arg, dy, H, W):
    B, C, Ho, Wo = dy.shape
    dx = np.zeros((B, C, H, W), dtype=dy.dtype)
    for n in range(B):
        for c in range(C):
            for q in range(Ho):
                for r in range(Wo):
                    a = arg[n, c, q, r]
                    dx[n, c, 2 * q + a // 2, 2 * r + a % 2] = dy[n, c, q, r]
    return dx
