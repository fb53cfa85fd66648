"""Differentiable primitives for the world-dynamics predictor.

Supported set: strided convolution, transposed convolution, leaky-ReLU
(slope 0.2), sigmoid, channel concatenation, spatial tiling of vectors,
and L1/L2 losses (optionally restricted to a pixel mask). Everything is
float64 and operates on (B, C, H, W) batches. Each primitive provides an
explicit backward so gradients are analytic, not traced.

Batched convolutions use per-sample GEMMs (numpy's stacked matmul), so a
sample's output is bit-identical no matter how the batch is chunked.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

LEAKY_SLOPE = 0.2


def _out_size(n: int, k: int, stride: int, pad: int) -> int:
    return (n + 2 * pad - k) // stride + 1


def im2col(x: np.ndarray, k: int, stride: int, pad: int) -> np.ndarray:
    """(B, C, H, W) -> (B, C*k*k, Ho*Wo) patch matrix."""
    b, c, h, w = x.shape
    ho, wo = _out_size(h, k, stride, pad), _out_size(w, k, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    sb, sc, sh, sw = xp.strides
    win = as_strided(
        xp,
        shape=(b, c, k, k, ho, wo),
        strides=(sb, sc, sh, sw, sh * stride, sw * stride),
    )
    return win.reshape(b, c * k * k, ho * wo)


def col2im(cols: np.ndarray, x_shape, k: int, stride: int, pad: int) -> np.ndarray:
    """Adjoint of im2col: scatter-add patches back onto the image grid."""
    b, c, h, w = x_shape
    ho, wo = _out_size(h, k, stride, pad), _out_size(w, k, stride, pad)
    xp = np.zeros((b, c, h + 2 * pad, w + 2 * pad))
    cols = cols.reshape(b, c, k, k, ho, wo)
    for i in range(k):
        for j in range(k):
            xp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += cols[
                :, :, i, j
            ]
    return xp[:, :, pad : pad + h, pad : pad + w]


def conv2d_forward(x, w, bias, stride, pad):
    """w: (F, C, k, k). Returns (y, cache)."""
    f, c, k, _ = w.shape
    if x.shape[1] != c:
        raise ValueError(f"conv input has {x.shape[1]} channels, weight expects {c}")
    cols = im2col(x, k, stride, pad)
    y = np.matmul(w.reshape(f, -1), cols)
    y = y.reshape(x.shape[0], f, _out_size(x.shape[2], k, stride, pad), -1)
    y += bias[None, :, None, None]
    return y, (x.shape, cols, w, stride, pad)


def conv2d_backward(dy, cache):
    x_shape, cols, w, stride, pad = cache
    f, c, k, _ = w.shape
    b = dy.shape[0]
    dyf = dy.reshape(b, f, -1)
    db = dyf.sum(axis=(0, 2))
    dw = np.matmul(dyf, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    dcols = np.matmul(w.reshape(f, -1).T, dyf)
    dx = col2im(dcols, x_shape, k, stride, pad)
    return dx, dw, db


def conv_transpose2d_forward(x, w, bias, stride, pad):
    """w: (C_in, F, k, k). Output size (H-1)*stride - 2*pad + k."""
    cin, f, k, _ = w.shape
    if x.shape[1] != cin:
        raise ValueError(f"tconv input has {x.shape[1]} channels, weight expects {cin}")
    b, _, h, wd = x.shape
    ho = (h - 1) * stride - 2 * pad + k
    wo = (wd - 1) * stride - 2 * pad + k
    cols = np.matmul(w.reshape(cin, -1).T, x.reshape(b, cin, h * wd))
    y = col2im(cols, (b, f, ho, wo), k, stride, pad)
    y += bias[None, :, None, None]
    return y, (x, w, stride, pad, (b, f, ho, wo))


def conv_transpose2d_backward(dy, cache):
    x, w, stride, pad, _ = cache
    cin, f, k, _ = w.shape
    b, _, h, wd = x.shape
    db = dy.sum(axis=(0, 2, 3))
    dcols = im2col(dy, k, stride, pad)
    dx = np.matmul(w.reshape(cin, -1), dcols).reshape(x.shape)
    dw = (
        np.matmul(x.reshape(b, cin, h * wd), dcols.transpose(0, 2, 1))
        .sum(axis=0)
        .reshape(w.shape)
    )
    return dx, dw, db


def leaky_relu_forward(x):
    y = np.where(x > 0, x, LEAKY_SLOPE * x)
    return y, x


def leaky_relu_backward(dy, x):
    return dy * np.where(x > 0, 1.0, LEAKY_SLOPE)


def sigmoid_forward(x):
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    return y, y


def sigmoid_backward(dy, y):
    return dy * y * (1.0 - y)


def tile_vector(vec: np.ndarray, h: int, w: int) -> np.ndarray:
    """(B, d) -> (B, d, h, w) constant planes."""
    return np.broadcast_to(vec[:, :, None, None], vec.shape + (h, w)).copy()


def tile_vector_backward(dy: np.ndarray) -> np.ndarray:
    return dy.sum(axis=(2, 3))


def concat_channels(parts):
    y = np.concatenate(parts, axis=1)
    return y, [p.shape[1] for p in parts]


def split_channels(dy, widths):
    out, at = [], 0
    for wdt in widths:
        out.append(dy[:, at : at + wdt])
        at += wdt
    return out


# Loss heads. Each returns (scalar loss, gradient w.r.t. pred).


def l1_loss(pred, target):
    diff = pred - target
    n = diff.size
    return np.abs(diff).sum() / n, np.sign(diff) / n


def masked_l1_loss(pred, target, world: np.ndarray):
    """Mean L1 over entries where `world` (broadcastable bool) is True.

    Zero world pixels is treated as a degenerate case with loss 0.
    """
    world = np.broadcast_to(world, pred.shape)
    n = int(world.sum())
    if n == 0:
        return 0.0, np.zeros_like(pred)
    diff = np.where(world, pred - target, 0.0)
    return np.abs(diff).sum() / n, np.sign(diff) / n


def l2_loss(pred, target):
    diff = pred - target
    n = diff.size
    return (diff * diff).sum() / n, 2.0 * diff / n


def sum_loss(pred, _target=None):
    return pred.sum(), np.ones_like(pred)
