"""Dense float32 tensors with tape-based reverse-mode differentiation.

Design points, fixed across the package:

* storage is float32, row-major; reductions accumulate in float64
* images follow the [C,H,W] convention; convolution and pooling also accept
  a batched [N,C,H,W] form
* recording happens on an explicit :class:`Tape`; with no tape active every
  op is a plain forward evaluation (that is the whole eval mode story)
* tapes are thread-local, so independent models may train concurrently on
  separate tapes while sharing read-only tensors
"""

from __future__ import annotations

import threading
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .rng import Rng


class ShapeError(ValueError):
    """Operands do not satisfy an op's shape contract."""


class NonFiniteError(ArithmeticError):
    """A forward op produced NaN or Inf."""


_LOCAL = threading.local()


def _tape_stack() -> list:
    stack = getattr(_LOCAL, "tapes", None)
    if stack is None:
        stack = []
        _LOCAL.tapes = stack
    return stack


def _active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


def _check_finite(arr: np.ndarray, where: str) -> None:
    # a single float64 reduction: any NaN/Inf in float32 data poisons the sum
    total = float(np.sum(arr, dtype=np.float64))
    if not np.isfinite(total):
        raise NonFiniteError(f"non-finite values produced by {where}")


class Tensor:
    """A float32 array with an optional same-shape gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.ascontiguousarray(data, dtype=np.float32)
        _check_finite(arr, "tensor construction")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)

    @classmethod
    def _result(cls, arr: np.ndarray, requires_grad: bool, op: str) -> "Tensor":
        out = cls.__new__(cls)
        out.data = np.ascontiguousarray(arr, dtype=np.float32)
        _check_finite(out.data, op)
        out.grad = None
        out.requires_grad = requires_grad
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a scalar, got shape {self.shape}")
        return float(self.data.reshape(())[()])

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float32, copy=True)
        else:
            self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(shape={tuple(self.shape)}, requires_grad={self.requires_grad})"


def param(data) -> Tensor:
    """Tensor tracked for gradients."""
    return Tensor(data, requires_grad=True)


class Tape:
    """Ordered record of differentiable ops for one forward pass.

    ``backward`` replays the record in exact reverse execution order and
    populates ``grad`` on every tensor that requires it.
    """

    def __init__(self):
        self._ops: list[tuple[Tensor, object]] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        if not stack or stack[-1] is not self:
            raise RuntimeError("tape stack corrupted: exiting a non-active tape")
        stack.pop()

    def _record(self, out: Tensor, bwd) -> None:
        self._ops.append((out, bwd))

    def backward(self, loss: Tensor) -> None:
        if loss.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.data)
        for out, bwd in reversed(self._ops):
            g = out.grad
            if g is None:
                continue
            bwd(g)

    def __len__(self) -> int:
        return len(self._ops)


def _emit(op: str, arr: np.ndarray, inputs: Sequence[Tensor], bwd_factory) -> Tensor:
    """Wrap an op result; record its backward closure when a tape is live."""
    requires = any(t.requires_grad for t in inputs)
    out = Tensor._result(arr, requires, op)
    tape = _active_tape()
    if tape is not None and requires:
        tape._record(out, bwd_factory(out))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0, dtype=np.float64)
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True, dtype=np.float64)
    return g.astype(np.float32)


# ---------------------------------------------------------------------------
# elementwise / structural ops


def add(a: Tensor, b: Tensor) -> Tensor:
    def bwd_factory(out):
        def bwd(g):
            if a.requires_grad:
                a.accumulate_grad(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b.accumulate_grad(_unbroadcast(g, b.data.shape))
        return bwd
    return _emit("add", a.data + b.data, (a, b), bwd_factory)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def bwd_factory(out):
        def bwd(g):
            if a.requires_grad:
                a.accumulate_grad(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b.accumulate_grad(-_unbroadcast(g, b.data.shape))
        return bwd
    return _emit("sub", a.data - b.data, (a, b), bwd_factory)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def bwd_factory(out):
        def bwd(g):
            if a.requires_grad:
                a.accumulate_grad(_unbroadcast(g * b.data, a.data.shape))
            if b.requires_grad:
                b.accumulate_grad(_unbroadcast(g * a.data, b.data.shape))
        return bwd
    return _emit("mul", a.data * b.data, (a, b), bwd_factory)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def bwd_factory(out):
        def bwd(g):
            if a.requires_grad:
                a.accumulate_grad(g * np.float32(c))
        return bwd
    return _emit("scale", a.data * np.float32(c), (a,), bwd_factory)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(int(s) for s in shape)

    def bwd_factory(out):
        def bwd(g):
            if a.requires_grad:
                a.accumulate_grad(g.reshape(a.data.shape))
        return bwd
    return _emit("reshape", a.data.reshape(shape), (a,), bwd_factory)


def _reflect_indices(n: int, padding: int) -> np.ndarray:
    idx = np.arange(-padding, n + padding)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    m = np.mod(idx, period)
    return (n - 1) - np.abs(m - (n - 1))


def pad_reflect(x: Tensor, padding: int) -> Tensor:
    """Edge-mirroring spatial padding: [...,H,W] -> [...,H+2p,W+2p]."""
    padding = int(padding)
    if padding < 0:
        raise ShapeError(f"pad_reflect needs padding >= 0, got {padding}")
    if padding == 0:
        return x
    h, w = x.data.shape[-2], x.data.shape[-1]
    iy = _reflect_indices(h, padding)
    ix = _reflect_indices(w, padding)
    out_data = x.data[..., iy[:, None], ix[None, :]]

    def bwd_factory(out):
        def bwd(g):
            if x.requires_grad:
                lead = int(np.prod(x.data.shape[:-2])) if x.ndim > 2 else 1
                gx = np.zeros((lead, h, w), dtype=np.float32)
                g3 = g.reshape(lead, h + 2 * padding, w + 2 * padding)
                np.add.at(gx, (np.arange(lead)[:, None, None],
                               iy[None, :, None], ix[None, None, :]), g3)
                x.accumulate_grad(gx.reshape(x.data.shape))
        return bwd
    return _emit("pad_reflect", out_data, (x,), bwd_factory)


def concat(parts: Iterable[Tensor], axis: int) -> Tensor:
    parts = list(parts)
    sizes = [p.data.shape[axis] for p in parts]

    def bwd_factory(out):
        def bwd(g):
            offset = 0
            for p, s in zip(parts, sizes):
                if p.requires_grad:
                    index = [slice(None)] * g.ndim
                    index[axis] = slice(offset, offset + s)
                    p.accumulate_grad(g[tuple(index)])
                offset += s
        return bwd
    return _emit("concat", np.concatenate([p.data for p in parts], axis=axis),
                 parts, bwd_factory)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul needs [m,k] x [k,n], got {a.shape} x {b.shape}")
    out_data = (a.data.astype(np.float64) @ b.data.astype(np.float64)).astype(np.float32)

    def bwd_factory(out):
        def bwd(g):
            g64 = g.astype(np.float64)
            if a.requires_grad:
                a.accumulate_grad((g64 @ b.data.astype(np.float64).T).astype(np.float32))
            if b.requires_grad:
                b.accumulate_grad((a.data.astype(np.float64).T @ g64).astype(np.float32))
        return bwd
    return _emit("matmul", out_data, (a, b), bwd_factory)


# ---------------------------------------------------------------------------
# convolution


def _as_batched(t: Tensor) -> tuple[np.ndarray, bool]:
    if t.ndim == 3:
        return t.data[None], True
    if t.ndim == 4:
        return t.data, False
    raise ShapeError(f"expected [C,H,W] or [N,C,H,W], got {t.shape}")


def conv2d(x: Tensor, k: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of x [C,H,W] (or [N,C,H,W]) with kernel [O,C,kh,kw]."""
    xb, squeeze = _as_batched(x)
    if k.ndim != 4 or k.shape[1] != xb.shape[1]:
        raise ShapeError(f"conv2d kernel [O,C,kh,kw] incompatible: input {x.shape}, "
                         f"kernel {k.shape}")
    stride, padding = int(stride), int(padding)
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv2d needs stride>=1 and padding>=0, got {stride}, {padding}")
    n, c, h, w = xb.shape
    o, _, kh, kw = k.shape
    if (h + 2 * padding - kh) % stride or (w + 2 * padding - kw) % stride:
        raise ShapeError(
            f"conv2d output extent not integral: input {x.shape}, kernel {k.shape}, "
            f"stride {stride}, padding {padding}")
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise ShapeError(f"conv2d kernel {k.shape} larger than padded input {x.shape}")
    out_data = kernels.conv2d_forward(xb, k.data, stride, padding)
    if squeeze:
        out_data = out_data[0]

    def bwd_factory(out):
        def bwd(g):
            gb = g[None] if squeeze else g
            gb = np.ascontiguousarray(gb, dtype=np.float32)
            if x.requires_grad:
                gx = kernels.conv2d_input_grad(gb, k.data, stride, padding, h, w)
                x.accumulate_grad(gx[0] if squeeze else gx)
            if k.requires_grad:
                k.accumulate_grad(kernels.conv2d_kernel_grad(xb, gb, stride, padding, kh, kw))
        return bwd
    return _emit("conv2d", out_data, (x, k), bwd_factory)


def conv2d_transpose(x: Tensor, k: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Transposed convolution, the exact adjoint of :func:`conv2d`.

    The kernel layout is the conv2d layout [Ci,Co,kh,kw] seen from the output
    side, so  <conv2d(a,k), b> == <a, conv2d_transpose(b,k)>  holds for one
    and the same kernel tensor.
    """
    xb, squeeze = _as_batched(x)
    if k.ndim != 4 or k.shape[0] != xb.shape[1]:
        raise ShapeError(f"conv2d_transpose kernel [Ci,Co,kh,kw] incompatible: "
                         f"input {x.shape}, kernel {k.shape}")
    stride, padding = int(stride), int(padding)
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv2d_transpose needs stride>=1 and padding>=0, "
                         f"got {stride}, {padding}")
    n, ci, hi, wi = xb.shape
    _, co, kh, kw = k.shape
    ht = (hi - 1) * stride + kh - 2 * padding
    wt = (wi - 1) * stride + kw - 2 * padding
    if ht < 1 or wt < 1:
        raise ShapeError(f"conv2d_transpose output collapses: input {x.shape}, "
                         f"kernel {k.shape}, stride {stride}, padding {padding}")
    out_data = kernels.conv2d_input_grad(xb, k.data, stride, padding, ht, wt)
    if squeeze:
        out_data = out_data[0]

    def bwd_factory(out):
        def bwd(g):
            gb = g[None] if squeeze else g
            gb = np.ascontiguousarray(gb, dtype=np.float32)
            if x.requires_grad:
                gx = kernels.conv2d_forward(gb, k.data, stride, padding)
                x.accumulate_grad(gx[0] if squeeze else gx)
            if k.requires_grad:
                k.accumulate_grad(kernels.conv2d_kernel_grad(gb, xb, stride, padding, kh, kw))
        return bwd
    return _emit("conv2d_transpose", out_data, (x, k), bwd_factory)


# ---------------------------------------------------------------------------
# pooling


def _pool_pair(window, stride):
    if isinstance(window, int):
        window = (window, window)
    wh, ww = int(window[0]), int(window[1])
    if wh < 1 or ww < 1:
        raise ShapeError(f"pool window must be positive, got {(wh, ww)}")
    if stride is None:
        stride = (wh, ww)
    elif isinstance(stride, int):
        stride = (stride, stride)
    sh, sw = int(stride[0]), int(stride[1])
    if sh < 1 or sw < 1:
        raise ShapeError(f"pool stride must be positive, got {(sh, sw)}")
    return wh, ww, sh, sw


def pool(x: Tensor, kind: str, window, stride=None) -> Tensor:
    """Windowed max/avg pooling with floor output semantics.

    Output extent is (H - window)//stride + 1; trailing rows or columns that
    do not fill a window are dropped.
    """
    xb, squeeze = _as_batched(x)
    wh, ww, sh, sw = _pool_pair(window, stride)
    n, c, h, w = xb.shape
    if wh > h or ww > w:
        raise ShapeError(f"pool window {(wh, ww)} exceeds input {x.shape}")
    if kind == "max":
        out_data, arg = kernels.maxpool_forward(xb, wh, ww, sh, sw)
    elif kind == "avg":
        out_data, arg = kernels.avgpool_forward(xb, wh, ww, sh, sw), None
    else:
        raise ValueError(f"pool kind must be 'max' or 'avg', got {kind!r}")
    if squeeze:
        out_data = out_data[0]

    def bwd_factory(out):
        def bwd(g):
            gb = np.ascontiguousarray(g[None] if squeeze else g, dtype=np.float32)
            if x.requires_grad:
                if kind == "max":
                    gx = kernels.maxpool_backward(gb, arg, wh, ww, sh, sw, h, w)
                else:
                    gx = kernels.avgpool_backward(gb, wh, ww, sh, sw, h, w)
                x.accumulate_grad(gx[0] if squeeze else gx)
        return bwd
    return _emit("pool", out_data, (x,), bwd_factory)


def global_pool(x: Tensor, kind: str) -> Tensor:
    """Reduce [C,H,W] -> [C,1,1] (or [N,C,H,W] -> [N,C,1,1])."""
    xb, squeeze = _as_batched(x)
    n, c, h, w = xb.shape
    if kind == "avg":
        out_data = xb.mean(axis=(2, 3), keepdims=True, dtype=np.float64).astype(np.float32)
        arg = None
    elif kind == "max":
        flat = xb.reshape(n, c, h * w)
        arg = flat.argmax(axis=2)
        out_data = np.take_along_axis(flat, arg[:, :, None], axis=2).reshape(n, c, 1, 1)
    else:
        raise ValueError(f"global_pool kind must be 'max' or 'avg', got {kind!r}")
    if squeeze:
        out_data = out_data[0]

    def bwd_factory(out):
        def bwd(g):
            gb = g[None] if squeeze else g
            if x.requires_grad:
                if kind == "avg":
                    gx = np.broadcast_to(gb / np.float32(h * w), xb.shape)
                    x.accumulate_grad(gx[0] if squeeze else np.ascontiguousarray(gx))
                else:
                    gx = np.zeros((n, c, h * w), dtype=np.float32)
                    np.put_along_axis(gx, arg[:, :, None], gb.reshape(n, c, 1), axis=2)
                    gx = gx.reshape(xb.shape)
                    x.accumulate_grad(gx[0] if squeeze else gx)
        return bwd
    return _emit("global_pool", out_data, (x,), bwd_factory)


def channel_pool(x: Tensor, kind: str) -> Tensor:
    """Reduce across channels: [C,H,W] -> [1,H,W] (batched likewise)."""
    xb, squeeze = _as_batched(x)
    n, c, h, w = xb.shape
    if c == 0:
        raise ShapeError("channel_pool needs at least one channel")
    if kind == "avg":
        out_data = xb.mean(axis=1, keepdims=True, dtype=np.float64).astype(np.float32)
        arg = None
    elif kind == "max":
        arg = xb.argmax(axis=1)
        out_data = np.take_along_axis(xb, arg[:, None], axis=1)
    else:
        raise ValueError(f"channel_pool kind must be 'max' or 'avg', got {kind!r}")
    if squeeze:
        out_data = out_data[0]

    def bwd_factory(out):
        def bwd(g):
            gb = g[None] if squeeze else g
            if x.requires_grad:
                if kind == "avg":
                    gx = np.broadcast_to(gb / np.float32(c), xb.shape)
                    x.accumulate_grad(gx[0] if squeeze else np.ascontiguousarray(gx))
                else:
                    gx = np.zeros_like(xb)
                    np.put_along_axis(gx, arg[:, None], gb, axis=1)
                    x.accumulate_grad(gx[0] if squeeze else gx)
        return bwd
    return _emit("channel_pool", out_data, (x,), bwd_factory)


# ---------------------------------------------------------------------------
# activations


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def bwd_factory(out):
        def bwd(g):
            if x.requires_grad:
                x.accumulate_grad(g * mask)
        return bwd
    return _emit("relu", np.maximum(x.data, 0), (x,), bwd_factory)


def sigmoid(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        s64 = 1.0 / (1.0 + np.exp(-x.data.astype(np.float64)))
    s = s64.astype(np.float32)

    def bwd_factory(out):
        def bwd(g):
            if x.requires_grad:
                x.accumulate_grad((g.astype(np.float64) * s64 * (1.0 - s64)).astype(np.float32))
        return bwd
    return _emit("sigmoid", s, (x,), bwd_factory)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data.astype(np.float64)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    p64 = e / e.sum(axis=axis, keepdims=True)

    def bwd_factory(out):
        def bwd(g):
            if x.requires_grad:
                g64 = g.astype(np.float64)
                dot = (g64 * p64).sum(axis=axis, keepdims=True)
                x.accumulate_grad((p64 * (g64 - dot)).astype(np.float32))
        return bwd
    return _emit("softmax", p64.astype(np.float32), (x,), bwd_factory)


# ---------------------------------------------------------------------------
# losses


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred.data.astype(np.float64) - target.data.astype(np.float64)
    n = pred.size
    loss = np.float32((diff * diff).sum() / n)

    def bwd_factory(out):
        def bwd(g):
            coeff = 2.0 * float(g.reshape(())[()]) / n
            gd = (coeff * diff).astype(np.float32)
            if pred.requires_grad:
                pred.accumulate_grad(gd)
            if target.requires_grad:
                target.accumulate_grad(-gd)
        return bwd
    return _emit("mse_loss", loss, (pred, target), bwd_factory)


LOG_EPS = 1e-12  # clamp for log() in cross-entropy


def cross_entropy(probs: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer labels under probability rows."""
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or labels.ndim != 1 or labels.shape[0] != probs.shape[0]:
        raise ShapeError(f"cross_entropy needs probs [n,C] and labels [n], got "
                         f"{probs.shape} and {labels.shape}")
    n, c = probs.shape
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"labels out of range [0,{c}): "
                         f"min {labels.min()}, max {labels.max()}")
    rows = np.arange(n)
    picked = probs.data[rows, labels].astype(np.float64)
    clamped = np.maximum(picked, LOG_EPS)
    loss = np.float32(-np.log(clamped).sum() / n)

    def bwd_factory(out):
        def bwd(g):
            if probs.requires_grad:
                gp = np.zeros((n, c), dtype=np.float64)
                live = picked >= LOG_EPS
                gp[rows[live], labels[live]] = -1.0 / (n * picked[live])
                gp *= float(g.reshape(())[()])
                probs.accumulate_grad(gp.astype(np.float32))
        return bwd
    return _emit("cross_entropy", loss, (probs,), bwd_factory)


# ---------------------------------------------------------------------------
# regularisation


def dropout(x: Tensor, rate: float, training: bool, rng: Rng | None = None) -> Tensor:
    """Inverted dropout: scaled masking in training, identity in eval."""
    rate = float(rate)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0,1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    keep = (rng.uniform(x.shape) >= rate).astype(np.float32) / np.float32(1.0 - rate)

    def bwd_factory(out):
        def bwd(g):
            if x.requires_grad:
                x.accumulate_grad(g * keep)
        return bwd
    return _emit("dropout", x.data * keep, (x,), bwd_factory)


# ---------------------------------------------------------------------------
# optimisation


class AdamState:
    """Per-parameter first/second moment buffers plus the step counter."""

    def __init__(self, params: Sequence[Tensor]):
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.t = 0


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray | None],
              state: AdamState, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One Adam update with bias correction, in place on the parameters."""
    if lr <= 0:
        raise ValueError(f"adam_step needs lr > 0, got {lr}")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            g = np.zeros_like(p.data)
        m = state.m[i]
        v = state.v[i]
        m *= np.float32(beta1)
        m += np.float32(1.0 - beta1) * g
        v *= np.float32(beta2)
        v += np.float32(1.0 - beta2) * (g * g)
        mhat = m / np.float32(c1)
        vhat = v / np.float32(c2)
        p.data -= np.float32(lr) * mhat / (np.sqrt(vhat) + np.float32(eps))


class Adam:
    """Convenience wrapper binding an AdamState to a parameter list."""

    def __init__(self, params: Sequence[Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError(f"Adam needs lr > 0, got {lr}")
        self.params = list(params)
        self.state = AdamState(self.params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps

    def step(self) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state,
                  self.lr, self.beta1, self.beta2, self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


# ---------------------------------------------------------------------------
# initialisation helpers


def he_normal(rng: Rng, shape, fan_in: int) -> Tensor:
    """Kaiming-style init for layers followed by ReLU."""
    std = float(np.sqrt(2.0 / fan_in))
    return Tensor(rng.normal(shape, 0.0, std).astype(np.float32), requires_grad=True)


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=np.float32), requires_grad=True)
