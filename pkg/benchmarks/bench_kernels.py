#!/usr/bin/env python3
"""Benchmark the numba JIT kernels against the pure-numpy fallback.

Times every hot kernel on training-realistic shapes, checks that the two
backends agree numerically, and prints a speedup table.  Run from the
repository root:

    python benchmarks/bench_kernels.py [--reps 30]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cavenet.kernels import numba_jit, numpy_ref
from cavenet.rng import Rng


def timeit(fn, *args, reps: int) -> float:
    fn(*args)  # warm-up (and JIT compile for the numba side)
    start = time.perf_counter()
    for _ in range(reps):
        fn(*args)
    return (time.perf_counter() - start) / reps * 1000.0


def check(a, b, label: str, tol: float = 2e-4) -> None:
    a0 = a[0] if isinstance(a, tuple) else a
    b0 = b[0] if isinstance(b, tuple) else b
    diff = float(np.max(np.abs(np.asarray(a0, dtype=np.float64)
                               - np.asarray(b0, dtype=np.float64))))
    if diff > tol:
        raise AssertionError(f"{label}: backends disagree by {diff:.3e}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--reps", type=int, default=30)
    args = parser.parse_args()

    rng = Rng(0xBE7C)
    rows = []

    def bench(label, fn_name, call_args):
        ref_fn = getattr(numpy_ref, fn_name)
        jit_fn = getattr(numba_jit, fn_name)
        check(ref_fn(*call_args), jit_fn(*call_args), label)
        t_ref = timeit(ref_fn, *call_args, reps=args.reps)
        t_jit = timeit(jit_fn, *call_args, reps=args.reps)
        rows.append((label, t_ref, t_jit))

    # convolution on backbone-like shapes
    for (n, c, h, o, kh, s, p) in [(32, 8, 32, 8, 4, 2, 1),
                                   (32, 8, 16, 8, 3, 1, 1),
                                   (32, 16, 8, 32, 4, 2, 1)]:
        x = rng.normal((n, c, h, h)).astype(np.float32)
        k = rng.normal((o, c, kh, kh), 0.0, 0.5).astype(np.float32)
        ho = (h + 2 * p - kh) // s + 1
        g = rng.normal((n, o, ho, ho)).astype(np.float32)
        shape = f"{n}x{c}x{h}^2 k{kh} s{s}"
        bench(f"conv fwd   {shape}", "conv2d_forward", (x, k, s, p))
        bench(f"conv dgrad {shape}", "conv2d_input_grad", (g, k, s, p, h, h))
        bench(f"conv wgrad {shape}", "conv2d_kernel_grad", (x, g, s, p, kh, kh))

    # pooling
    xp = rng.normal((32, 16, 16, 16)).astype(np.float32)
    gp = rng.normal((32, 16, 8, 8)).astype(np.float32)
    bench("maxpool fwd 32x16x16^2", "maxpool_forward", (xp, 2, 2, 2, 2))
    _, arg = numpy_ref.maxpool_forward(xp, 2, 2, 2, 2)
    bench("maxpool bwd 32x16x16^2", "maxpool_backward", (gp, arg, 2, 2, 2, 2, 16, 16))
    bench("avgpool fwd 32x16x16^2", "avgpool_forward", (xp, 2, 2, 2, 2))
    bench("avgpool bwd 32x16x16^2", "avgpool_backward", (gp, 2, 2, 2, 2, 16, 16))

    # tree split search on latent-like matrices
    vals = rng.normal((2000, 32)).astype(np.float32)
    y = rng.integers(10, 2000).astype(np.int32)
    resid = rng.normal(2000)
    bench("gini split  2000x32", "best_split_gini", (vals, y, 10))
    bench("sse split   2000x32", "best_split_sse", (vals, resid))

    width = max(len(r[0]) for r in rows)
    print(f"\n{'kernel':<{width}}  {'numpy ms':>9}  {'numba ms':>9}  {'speedup':>8}")
    print("-" * (width + 32))
    for label, t_ref, t_jit in rows:
        print(f"{label:<{width}}  {t_ref:9.3f}  {t_jit:9.3f}  {t_ref / t_jit:7.1f}x")
    print("\nbackends agree on every kernel (max abs diff <= 2e-4)")


if __name__ == "__main__":
    main()
