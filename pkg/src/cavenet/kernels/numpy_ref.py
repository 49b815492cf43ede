"""Pure-numpy implementations of the hot kernels.

These mirror the numba versions in ``numba_jit`` exactly in contract:
float32 in, float32 out, with reductions accumulated in float64.  Selected
when the ``CAVENET_BACKEND=numpy`` flag is set or numba is unavailable.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND_NAME = "numpy"


def _windows(x: np.ndarray, kh: int, kw: int, s: int, p: int) -> np.ndarray:
    # [N,C,H,W] -> [N,C,Ho,Wo,kh,kw] view over the zero-padded input
    if p:
        x = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    return sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::s, ::s]


def conv2d_forward(x: np.ndarray, k: np.ndarray, stride: int, padding: int) -> np.ndarray:
    kh, kw = k.shape[2], k.shape[3]
    win = _windows(x, kh, kw, stride, padding).astype(np.float64)
    out = np.einsum("ncyxuv,ocuv->noyx", win, k.astype(np.float64), optimize=True)
    return out.astype(np.float32)


def conv2d_input_grad(gy: np.ndarray, k: np.ndarray, stride: int, padding: int,
                      h: int, w: int) -> np.ndarray:
    # Adjoint of conv2d_forward with respect to the input: contract the output
    # gradient with the kernel over output channels, then scatter each kernel
    # offset back onto the (padded) input grid with strided slice adds.
    n, o, ho, wo = gy.shape
    _, c, kh, kw = k.shape
    contrib = np.einsum("noyx,ocuv->ncuvyx", gy.astype(np.float64),
                        k.astype(np.float64), optimize=True)
    gxp = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=np.float64)
    for u in range(kh):
        for v in range(kw):
            gxp[:, :, u:u + stride * ho:stride,
                v:v + stride * wo:stride] += contrib[:, :, u, v]
    out = gxp[:, :, padding:padding + h, padding:padding + w]
    return out.astype(np.float32)


def conv2d_kernel_grad(x: np.ndarray, gy: np.ndarray, stride: int, padding: int,
                       kh: int, kw: int) -> np.ndarray:
    win = _windows(x, kh, kw, stride, padding).astype(np.float64)
    gk = np.einsum("ncyxuv,noyx->ocuv", win, gy.astype(np.float64), optimize=True)
    return gk.astype(np.float32)


def maxpool_forward(x: np.ndarray, wh: int, ww: int, sh: int, sw: int):
    win = sliding_window_view(x, (wh, ww), axis=(2, 3))[:, :, ::sh, ::sw]
    flat = win.reshape(win.shape[:4] + (wh * ww,))
    arg = flat.argmax(axis=-1).astype(np.int32)
    out = np.take_along_axis(flat, arg[..., None].astype(np.intp), axis=-1)[..., 0]
    return np.ascontiguousarray(out), arg


def maxpool_backward(gy: np.ndarray, arg: np.ndarray, wh: int, ww: int,
                     sh: int, sw: int, h: int, w: int) -> np.ndarray:
    n, c, ho, wo = gy.shape
    gx = np.zeros((n, c, h, w), dtype=np.float32)
    ni, ci, yi, xi = np.indices((n, c, ho, wo), sparse=False)
    iy = yi * sh + arg // ww
    ix = xi * sw + arg % ww
    np.add.at(gx, (ni, ci, iy, ix), gy)
    return gx


def avgpool_forward(x: np.ndarray, wh: int, ww: int, sh: int, sw: int) -> np.ndarray:
    win = sliding_window_view(x, (wh, ww), axis=(2, 3))[:, :, ::sh, ::sw]
    return win.mean(axis=(-2, -1), dtype=np.float64).astype(np.float32)


def avgpool_backward(gy: np.ndarray, wh: int, ww: int, sh: int, sw: int,
                     h: int, w: int) -> np.ndarray:
    n, c, ho, wo = gy.shape
    gx = np.zeros((n, c, h, w), dtype=np.float32)
    share = gy / np.float32(wh * ww)
    for u in range(wh):
        for v in range(ww):
            gx[:, :, u:u + sh * ho:sh, v:v + sw * wo:sw] += share
    return gx


def best_split_gini(vals: np.ndarray, y: np.ndarray, n_classes: int):
    """Best (feature, threshold) by Gini gain over candidate columns.

    Returns (feature, threshold, gain); feature is -1 when no split with a
    positive gain exists.  Ties go to the lowest feature index, then the
    lowest threshold.
    """
    n, m = vals.shape
    total = np.bincount(y, minlength=n_classes).astype(np.float64)
    parent = 1.0 - np.sum((total / n) ** 2)
    best_f, best_thr, best_gain = -1, 0.0, 0.0
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), y] = 1.0
    for f in range(m):
        col = vals[:, f]
        order = np.argsort(col, kind="stable")
        sv = col[order].astype(np.float64)
        left = np.cumsum(onehot[order], axis=0)
        cut = np.nonzero(sv[:-1] < sv[1:])[0]
        if cut.size == 0:
            continue
        nl = (cut + 1).astype(np.float64)
        nr = n - nl
        lc = left[cut]
        rc = total[None, :] - lc
        gl = 1.0 - np.sum((lc / nl[:, None]) ** 2, axis=1)
        gr = 1.0 - np.sum((rc / nr[:, None]) ** 2, axis=1)
        gain = parent - (nl / n) * gl - (nr / n) * gr
        i = int(np.argmax(gain))
        if gain[i] > best_gain + 1e-12:
            best_gain = float(gain[i])
            best_f = f
            best_thr = 0.5 * (sv[cut[i]] + sv[cut[i] + 1])
    return best_f, best_thr, best_gain


def best_split_sse(vals: np.ndarray, resid: np.ndarray):
    """Best (feature, threshold) by squared-error reduction for regression."""
    n, m = vals.shape
    r = resid.astype(np.float64)
    tot = r.sum()
    tot2 = (r * r).sum()
    parent = tot2 - tot * tot / n
    best_f, best_thr, best_gain = -1, 0.0, 0.0
    for f in range(m):
        col = vals[:, f]
        order = np.argsort(col, kind="stable")
        sv = col[order].astype(np.float64)
        rs = np.cumsum(r[order])
        rs2 = np.cumsum(r[order] ** 2)
        cut = np.nonzero(sv[:-1] < sv[1:])[0]
        if cut.size == 0:
            continue
        nl = (cut + 1).astype(np.float64)
        nr = n - nl
        sl, sl2 = rs[cut], rs2[cut]
        sr, sr2 = tot - sl, tot2 - sl2
        sse = (sl2 - sl * sl / nl) + (sr2 - sr * sr / nr)
        gain = parent - sse
        i = int(np.argmax(gain))
        if gain[i] > best_gain + 1e-12:
            best_gain = float(gain[i])
            best_f = f
            best_thr = 0.5 * (sv[cut[i]] + sv[cut[i] + 1])
    return best_f, best_thr, best_gain
