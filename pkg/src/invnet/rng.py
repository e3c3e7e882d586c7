"""Seeded randomness: Philox counter streams with Box-Muller Gaussians.

Same seed gives a bit-identical stream. ``substream(i)`` derives independent
streams (distinct Philox keys) for parallel data generation.
"""

from __future__ import annotations

import math

import numpy as np

_U64 = (1 << 64) - 1


class Rng:
    """Deterministic random source.

    Uniforms come straight from a Philox counter generator. Gaussians use the
    Box-Muller transform: for uniform pairs (u1, u2) in [0,1),
    r = sqrt(-2 ln(1-u1)), theta = 2 pi u2, and the pair
    (r cos theta, r sin theta) is standard normal.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        key = (self.seed & _U64) | ((self.stream & _U64) << 64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def substream(self, i: int) -> "Rng":
        """Independent stream i derived from this rng's seed."""
        return Rng(self.seed, self.stream * 1_000_003 + 1 + int(i))

    def uniform(self, lo: float, hi: float, size=None) -> np.ndarray:
        if not lo < hi:
            raise ValueError(f"uniform needs lo < hi, got [{lo}, {hi})")
        return lo + (hi - lo) * self._gen.random(size)

    def gaussian(self, size=None) -> np.ndarray:
        shape = () if size is None else (
            (size,) if isinstance(size, int) else tuple(size)
        )
        n = int(np.prod(shape)) if shape else 1
        pairs = (n + 1) // 2
        u1 = self._gen.random(pairs)
        u2 = self._gen.random(pairs)
        r = np.sqrt(-2.0 * np.log1p(-u1))  # 1-u1 in (0,1] keeps the log finite
        theta = (2.0 * math.pi) * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return z.reshape(shape) if shape else z[0]

    def integers(self, lo: int, hi: int, size=None) -> np.ndarray:
        """Integers in [lo, hi)."""
        return self._gen.integers(lo, hi, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, k: int, replace: bool = False) -> np.ndarray:
        return self._gen.choice(n, size=k, replace=replace)
