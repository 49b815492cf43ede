"""Deterministic counter-based random number generation.

The generator is a vectorised splitmix64: draw ``i`` is the splitmix64
finaliser applied to ``key + i * GOLDEN``.  Because each draw depends only on
``(key, counter)``, blocks of any size can be produced with pure numpy uint64
arithmetic, streams can be forked without touching the parent's state, and
every result is reproducible across platforms from a single 64-bit seed.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    """splitmix64 finaliser on a Python int (mod 2^64)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MIX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """Seedable, forkable random stream.

    All consumers in this package draw from an ``Rng``; nothing uses global
    numpy random state, so results depend only on explicit seeds.
    """

    def __init__(self, seed: int):
        self._key = _mix(int(seed) ^ _GOLDEN)
        self._counter = 0

    def fork(self, stream: int) -> "Rng":
        """Derive an independent child stream.

        The child key is a hash of (parent key, stream id), so forking is
        order-free: ``fork(i)`` yields the same stream no matter how many
        draws the parent has made.
        """
        child = Rng.__new__(Rng)
        child._key = _mix(self._key ^ _mix((int(stream) * _GOLDEN) & _MASK))
        child._counter = 0
        return child

    def u64(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit draws."""
        idx = np.arange(self._counter, self._counter + n, dtype=np.uint64)
        self._counter += n
        states = np.uint64(self._key) + idx * np.uint64(_GOLDEN)
        return _mix_array(states)

    def uniform(self, shape=(), lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        """Uniform float64 draws in [lo, hi)."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        u = (self.u64(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        out = lo + (hi - lo) * u
        return out.reshape(shape) if shape else float(out[0])

    def normal(self, shape=(), mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        """Gaussian draws via Box-Muller."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        m = (n + 1) // 2
        # u1 in (0, 1] so log() is finite
        u1 = ((self.u64(m) >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0 ** -53)
        u2 = (self.u64(m) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        out = mean + std * z
        return out.reshape(shape) if shape else float(out[0])

    def integers(self, bound: int, n: int = 1) -> np.ndarray:
        """Uniform int64 draws in [0, bound).

        Uses the 53-bit scale method; bias is below bound/2^53 and thus
        irrelevant for the bounds used here.
        """
        if bound <= 0:
            raise ValueError(f"integers() bound must be positive, got {bound}")
        u = (self.u64(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        return np.minimum((u * bound).astype(np.int64), bound - 1)

    def randint(self, bound: int) -> int:
        return int(self.integers(bound, 1)[0])

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n) by sorting random keys."""
        keys = self.u64(n)
        return np.argsort(keys, kind="stable")

    def choice(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n), in sampled order."""
        if k > n:
            raise ValueError(f"cannot choose {k} distinct items from {n}")
        return self.permutation(n)[:k]

    def bernoulli(self, p: float) -> bool:
        return bool(self.uniform() < p)
