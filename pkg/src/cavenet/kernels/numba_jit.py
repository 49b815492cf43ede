"""numba-compiled hot kernels.

Same contracts as ``numpy_ref``: float32 arrays in and out, float64
accumulators inside every reduction.  Loops are written gather/scatter style
with no shared mutable state, so calls are thread-safe and bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit

BACKEND_NAME = "numba"


@njit(cache=True, fastmath=True)
def _pad_nchw(x, padding):
    n, c, h, w = x.shape
    xp = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=np.float32)
    xp[:, :, padding:padding + h, padding:padding + w] = x
    return xp


@njit(cache=True, fastmath=True)
def conv2d_forward(x, k, stride, padding):
    n, c, h, w = x.shape
    o, _, kh, kw = k.shape
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    xp = _pad_nchw(x, padding)
    kf = np.ascontiguousarray(k).reshape(o, c * kh * kw)
    out = np.empty((n, o, ho, wo), dtype=np.float32)
    patch = np.empty(c * kh * kw, dtype=np.float32)
    for b in range(n):
        for oy in range(ho):
            y0 = oy * stride
            for ox in range(wo):
                x0 = ox * stride
                t = 0
                for ic in range(c):
                    for u in range(kh):
                        for v in range(kw):
                            patch[t] = xp[b, ic, y0 + u, x0 + v]
                            t += 1
                for oc in range(o):
                    acc = 0.0
                    for t2 in range(c * kh * kw):
                        acc += patch[t2] * kf[oc, t2]
                    out[b, oc, oy, ox] = acc
    return out


@njit(cache=True, fastmath=True)
def conv2d_input_grad(gy, k, stride, padding, h, w):
    n, o, ho, wo = gy.shape
    _, c, kh, kw = k.shape
    kt = np.ascontiguousarray(k.transpose(1, 2, 3, 0))  # [C,kh,kw,O]
    gxp = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=np.float64)
    gv = np.empty(o, dtype=np.float32)
    for b in range(n):
        for oy in range(ho):
            y0 = oy * stride
            for ox in range(wo):
                x0 = ox * stride
                for oc in range(o):
                    gv[oc] = gy[b, oc, oy, ox]
                for ic in range(c):
                    for u in range(kh):
                        for v in range(kw):
                            acc = 0.0
                            for oc in range(o):
                                acc += gv[oc] * kt[ic, u, v, oc]
                            gxp[b, ic, y0 + u, x0 + v] += acc
    out = gxp[:, :, padding:padding + h, padding:padding + w]
    return out.astype(np.float32)


@njit(cache=True, fastmath=True)
def conv2d_kernel_grad(x, gy, stride, padding, kh, kw):
    n, c, h, w = x.shape
    o = gy.shape[1]
    ho, wo = gy.shape[2], gy.shape[3]
    xp = _pad_nchw(x, padding)
    gk = np.zeros((o, c * kh * kw), dtype=np.float64)
    patch = np.empty(c * kh * kw, dtype=np.float32)
    for b in range(n):
        for oy in range(ho):
            y0 = oy * stride
            for ox in range(wo):
                x0 = ox * stride
                t = 0
                for ic in range(c):
                    for u in range(kh):
                        for v in range(kw):
                            patch[t] = xp[b, ic, y0 + u, x0 + v]
                            t += 1
                for oc in range(o):
                    g = gy[b, oc, oy, ox]
                    for t2 in range(c * kh * kw):
                        gk[oc, t2] += g * patch[t2]
    return gk.astype(np.float32).reshape(o, c, kh, kw)


@njit(cache=True)
def maxpool_forward(x, wh, ww, sh, sw):
    n, c, h, w = x.shape
    ho = (h - wh) // sh + 1
    wo = (w - ww) // sw + 1
    out = np.empty((n, c, ho, wo), dtype=np.float32)
    arg = np.empty((n, c, ho, wo), dtype=np.int32)
    for b in range(n):
        for ic in range(c):
            for oy in range(ho):
                for ox in range(wo):
                    best = np.float32(-np.inf)
                    bi = 0
                    for u in range(wh):
                        for v in range(ww):
                            val = x[b, ic, oy * sh + u, ox * sw + v]
                            if val > best:
                                best = val
                                bi = u * ww + v
                    out[b, ic, oy, ox] = best
                    arg[b, ic, oy, ox] = bi
    return out, arg


@njit(cache=True)
def maxpool_backward(gy, arg, wh, ww, sh, sw, h, w):
    n, c, ho, wo = gy.shape
    gx = np.zeros((n, c, h, w), dtype=np.float32)
    for b in range(n):
        for ic in range(c):
            for oy in range(ho):
                for ox in range(wo):
                    bi = arg[b, ic, oy, ox]
                    gx[b, ic, oy * sh + bi // ww, ox * sw + bi % ww] += gy[b, ic, oy, ox]
    return gx


@njit(cache=True)
def avgpool_forward(x, wh, ww, sh, sw):
    n, c, h, w = x.shape
    ho = (h - wh) // sh + 1
    wo = (w - ww) // sw + 1
    out = np.empty((n, c, ho, wo), dtype=np.float32)
    inv = 1.0 / (wh * ww)
    for b in range(n):
        for ic in range(c):
            for oy in range(ho):
                for ox in range(wo):
                    acc = 0.0
                    for u in range(wh):
                        for v in range(ww):
                            acc += x[b, ic, oy * sh + u, ox * sw + v]
                    out[b, ic, oy, ox] = acc * inv
    return out


@njit(cache=True)
def avgpool_backward(gy, wh, ww, sh, sw, h, w):
    n, c, ho, wo = gy.shape
    gx = np.zeros((n, c, h, w), dtype=np.float32)
    for b in range(n):
        for ic in range(c):
            for oy in range(ho):
                for ox in range(wo):
                    share = gy[b, ic, oy, ox] / (wh * ww)
                    for u in range(wh):
                        for v in range(ww):
                            gx[b, ic, oy * sh + u, ox * sw + v] += share
    return gx


@njit(cache=True)
def best_split_gini(vals, y, n_classes):
    n, m = vals.shape
    total = np.zeros(n_classes, dtype=np.float64)
    for i in range(n):
        total[y[i]] += 1.0
    parent = 1.0
    for j in range(n_classes):
        parent -= (total[j] / n) ** 2
    best_f = -1
    best_thr = 0.0
    best_gain = 0.0
    left = np.zeros(n_classes, dtype=np.float64)
    for f in range(m):
        col = vals[:, f].copy()
        order = np.argsort(col, kind="mergesort")
        left[:] = 0.0
        for i in range(n - 1):
            left[y[order[i]]] += 1.0
            lo = col[order[i]]
            hi = col[order[i + 1]]
            if lo >= hi:
                continue
            nl = float(i + 1)
            nr = float(n - i - 1)
            gl = 1.0
            gr = 1.0
            for j in range(n_classes):
                pl = left[j] / nl
                pr = (total[j] - left[j]) / nr
                gl -= pl * pl
                gr -= pr * pr
            gain = parent - (nl / n) * gl - (nr / n) * gr
            if gain > best_gain + 1e-12:
                best_gain = gain
                best_f = f
                best_thr = 0.5 * (float(lo) + float(hi))
    return best_f, best_thr, best_gain


@njit(cache=True)
def best_split_sse(vals, resid):
    n, m = vals.shape
    tot = 0.0
    tot2 = 0.0
    for i in range(n):
        tot += resid[i]
        tot2 += resid[i] * resid[i]
    parent = tot2 - tot * tot / n
    best_f = -1
    best_thr = 0.0
    best_gain = 0.0
    for f in range(m):
        col = vals[:, f].copy()
        order = np.argsort(col, kind="mergesort")
        sl = 0.0
        sl2 = 0.0
        for i in range(n - 1):
            r = resid[order[i]]
            sl += r
            sl2 += r * r
            lo = col[order[i]]
            hi = col[order[i + 1]]
            if lo >= hi:
                continue
            nl = float(i + 1)
            nr = float(n - i - 1)
            sr = tot - sl
            sr2 = tot2 - sl2
            sse = (sl2 - sl * sl / nl) + (sr2 - sr * sr / nr)
            gain = parent - sse
            if gain > best_gain + 1e-12:
                best_gain = gain
                best_f = f
                best_thr = 0.5 * (float(lo) + float(hi))
    return best_f, best_thr, best_gain
