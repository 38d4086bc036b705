"""Pure-numpy convolution / pooling kernels (fallback backend).

Convolutions are same-padded cross-correlations implemented with
sliding-window views and einsum; max-pooling is 2x2 stride 2 with
first-occurrence argmax (matches the numba backend's convention).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _windows(x, k):
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    # (B, C, H, W, k, k)
    return sliding_window_view(xp, (k, k), axis=(2, 3))


def conv2d_forward(x, w, b):
    """x: (B,Ci,H,W), w: (Co,Ci,k,k), b: (Co,) -> (B,Co,H,W)."""
    win = _windows(x, w.shape[-1])
    y = np.einsum("bcxyij,ocij->boxy", win, w, optimize=True)
    return y + b[None, :, None, None]


def conv2d_backward(x, w, dy):
    """Gradients of a same-padded conv: returns (dx, dw, db)."""
    k = w.shape[-1]
    db = dy.sum(axis=(0, 2, 3))
    dw = np.einsum("bcxyij,boxy->ocij", _windows(x, k), dy, optimize=True)
    wflip = w[:, :, ::-1, ::-1]
    dx = np.einsum("boxyij,ocij->bcxy", _windows(dy, k), wflip, optimize=True)
    return dx, dw, db


def maxpool2_forward(x):
    """2x2/2 max pool; x: (B,C,H,W) with even H,W -> (y, argmax in [0,4))."""
    B, C, H, W = x.shape
    z = x.reshape(B, C, H // 2, 2, W // 2, 2)
    z = z.transpose(0, 1, 2, 4, 3, 5).reshape(B, C, H // 2, W // 2, 4)
    arg = z.argmax(axis=-1)
    y = np.take_along_axis(z, arg[..., None], axis=-1)[..., 0]
    return y, arg.astype(np.int8)


def maxpool2_backward(arg, dy, H, W):
    """Scatter pooled gradients back to the (B,C,H,W) input."""
    B, C, Ho, Wo = dy.shape
    dz = np.zeros((B, C, Ho, Wo, 4), dtype=dy.dtype)
    np.put_along_axis(dz, arg[..., None].astype(np.int64), dy[..., None], axis=-1)
    dz = dz.reshape(B, C, Ho, Wo, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return dz.reshape(B, C, H, W)
