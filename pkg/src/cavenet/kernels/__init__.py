"""Backend selection for the hot kernels.

The ``CAVENET_BACKEND`` environment variable picks the implementation:

* ``auto`` (default) - numba when importable, else pure numpy
* ``numba``          - require the JIT kernels, fail loudly if unavailable
* ``numpy``          - force the pure-numpy fallback

Both backends share one contract (float32 data, float64 accumulation), so
swapping them changes speed, not semantics.  ``benchmarks/bench_kernels.py``
compares the two side by side.
"""

from __future__ import annotations

import os

_choice = os.environ.get("CAVENET_BACKEND", "auto").strip().lower()

if _choice not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"CAVENET_BACKEND must be one of auto|numba|numpy, got {_choice!r}")

if _choice == "numpy":
    from . import numpy_ref as _impl
elif _choice == "numba":
    from . import numba_jit as _impl
else:
    try:
        from . import numba_jit as _impl
    except ImportError:
        from . import numpy_ref as _impl

ACTIVE_BACKEND = _impl.BACKEND_NAME

conv2d_forward = _impl.conv2d_forward
conv2d_input_grad = _impl.conv2d_input_grad
conv2d_kernel_grad = _impl.conv2d_kernel_grad
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
avgpool_forward = _impl.avgpool_forward
avgpool_backward = _impl.avgpool_backward
best_split_gini = _impl.best_split_gini
best_split_sse = _impl.best_split_sse


def active_backend() -> str:
    """Name of the kernel backend chosen at import time."""
    return ACTIVE_BACKEND
