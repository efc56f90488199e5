"""Array primitives: same-padding convolution, 2x2 max-pool, dropout,
position corruption. All float64, batch-first (B, C, H, W).

Convolutions go through sliding-window views contracted with tensordot so
the heavy lifting lands in BLAS; backward passes are exact transposes of
the forward computation.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InputError


def _im2col(
    x_cl: np.ndarray, k: int, pad: int
) -> tuple[np.ndarray, tuple[int, int, int]]:
    """Gather k x k windows of a channel-last (B, H, W, C) array.

    Returns ((B * H' * W', k * k * C), (B, H', W')) with columns ordered
    (di, dj, c); the channel-last layout makes each (dj, c) window row one
    contiguous run, so the gather is a streaming copy rather than a strided
    one.
    """
    xp = np.pad(x_cl, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    win = sliding_window_view(xp, (k, k), axis=(1, 2))
    b, ho, wo = win.shape[:3]
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(b * ho * wo, -1)
    return cols, (b, ho, wo)


def conv2d(
    x: np.ndarray, w: np.ndarray, b: np.ndarray, pad: int,
    return_cols: bool = False,
) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
    """Cross-correlation with stride 1 and symmetric zero padding.

    x: (B, C, H, W), w: (O, C, k, k), b: (O,) -> (B, O, H', W') where
    H' = H + 2*pad - k + 1 (the callers always choose pad so H' == H).
    With ``return_cols`` the gathered window matrix comes back too, so a
    following :func:`conv2d_backward` can skip rebuilding it.
    """
    k = w.shape[2]
    cols, (nb, ho, wo) = _im2col(x.transpose(0, 2, 3, 1), k, pad)
    wmat = np.ascontiguousarray(w.transpose(2, 3, 1, 0)).reshape(-1, w.shape[0])
    out = cols @ wmat
    out += b
    out = np.ascontiguousarray(out.reshape(nb, ho, wo, -1).transpose(0, 3, 1, 2))
    return (out, cols) if return_cols else out


def conv2d_backward(
    dy: np.ndarray,
    x: np.ndarray,
    w: np.ndarray,
    pad: int,
    cols: np.ndarray | None = None,
    need_dx: bool = True,
) -> tuple[np.ndarray | None, np.ndarray, np.ndarray]:
    """Gradients of :func:`conv2d` w.r.t. input, weights, and bias.

    ``cols`` may pass the window matrix from the forward call to avoid one
    gather; ``need_dx=False`` (for the first layer, whose input gradient
    nobody consumes) skips the most expensive path and returns dx=None.
    """
    o, c, k, _ = w.shape
    if cols is None:
        cols, _ = _im2col(x.transpose(0, 2, 3, 1), k, pad)
    dyt = np.ascontiguousarray(dy.transpose(0, 2, 3, 1))  # (B, H', W', O)
    dy_mat = dyt.reshape(-1, o)
    # dW[(di,dj,c), o] = cols^T dy, then back to (O, C, k, k)
    dw = (cols.T @ dy_mat).reshape(k, k, c, o).transpose(3, 2, 0, 1)
    db = dy.sum(axis=(0, 2, 3))
    dw = np.ascontiguousarray(dw)
    if not need_dx:
        return None, dw, db
    # dX = full correlation of dy with the kernels flipped in both space axes
    dcols, (nb, hi, wi) = _im2col(dyt, k, k - 1 - pad)
    wb = np.ascontiguousarray(
        w[:, :, ::-1, ::-1].transpose(2, 3, 0, 1)
    ).reshape(-1, c)
    dx = (dcols @ wb).reshape(nb, hi, wi, c).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(dx), dw, db


def maxpool2(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2 max-pool with stride 2; returns (pooled, argmax-in-window).

    Ties resolve to the first position in (top-left, top-right, bottom-left,
    bottom-right) order, which keeps the backward pass deterministic.
    """
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise InputError(f"max-pool needs even spatial size, got {h}x{w}")
    xr = x.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    xr = np.ascontiguousarray(xr).reshape(b, c, h // 2, w // 2, 4)
    idx = xr.argmax(axis=-1)
    out = np.take_along_axis(xr, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool2_backward(dy: np.ndarray, idx: np.ndarray, in_shape: tuple) -> np.ndarray:
    """Scatter pooled gradients back to the argmax positions."""
    b, c, h, w = in_shape
    dxr = np.zeros((b, c, h // 2, w // 2, 4), dtype=dy.dtype)
    np.put_along_axis(dxr, idx[..., None], dy[..., None], axis=-1)
    dxr = dxr.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return np.ascontiguousarray(dxr).reshape(in_shape)


def dropout_mask(shape: tuple, p: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout multiplier: zeros with probability p, else 1/(1-p)."""
    keep = rng.random(shape) >= p
    return keep.astype(np.float64) / (1.0 - p)


def corrupt_positions(
    x: np.ndarray, fraction: float, rng: np.random.Generator
) -> np.ndarray:
    """Zero exactly round(fraction * positions) entries per sample.

    ``x`` is (B, ...) and positions are chosen uniformly without replacement
    per sample, independently across samples. Returns a new array.
    """
    if not (0.0 <= fraction <= 1.0):
        raise InputError(f"corruption fraction must be in [0, 1], got {fraction}")
    b = x.shape[0]
    n = int(np.prod(x.shape[1:]))
    k = int(round(fraction * n))
    out = x.copy()
    if k == 0:
        return out
    flat = out.reshape(b, n)
    scores = rng.random((b, n))
    hit = np.argpartition(scores, k - 1, axis=1)[:, :k]
    np.put_along_axis(flat, hit, 0.0, axis=1)
    return out
