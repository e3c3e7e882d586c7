"""Component-wise standardization with optional log transforms."""

from __future__ import annotations

import numpy as np


class NormalizationStats:
    """Per-component mean/std plus log-transform flags.

    Log-flagged components are log-transformed before standardizing (and
    exponentiated after destandardizing). destandardize(standardize(x)) == x
    to machine precision.
    """

    def __init__(self, mean, std, log_flags=None):
        self.mean = np.asarray(mean, dtype=np.float64).reshape(-1)
        self.std = np.asarray(std, dtype=np.float64).reshape(-1)
        if log_flags is None:
            log_flags = np.zeros(self.mean.size, dtype=bool)
        self.log_flags = np.asarray(log_flags, dtype=bool).reshape(-1)
        if not (self.mean.size == self.std.size == self.log_flags.size):
            raise ValueError("mean, std, log_flags must have equal lengths")
        if np.any(self.std <= 0.0) or not np.all(np.isfinite(self.std)):
            raise ValueError(
                "std must be strictly positive; substitute 1 for constant components"
            )

    @property
    def dim(self) -> int:
        return self.mean.size

    @classmethod
    def fit(cls, x, log_flags=None, scale_only: bool = False) -> "NormalizationStats":
        """Fit on training rows only. Constant components get std 1.

        scale_only forces mean 0 (used for residual targets so a zero net
        stays the exact identity flow map).
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError("fit expects rows x components")
        if log_flags is not None:
            log_flags = np.asarray(log_flags, dtype=bool)
            x = x.copy()
            _apply_log(x, log_flags)
        mean = np.zeros(x.shape[1]) if scale_only else x.mean(axis=0)
        std = np.sqrt(np.mean((x - mean) ** 2, axis=0))
        std[std == 0.0] = 1.0
        return cls(mean, std, log_flags)

    @classmethod
    def identity(cls, dim: int, log_flags=None) -> "NormalizationStats":
        return cls(np.zeros(dim), np.ones(dim), log_flags)

    def subset(self, idx) -> "NormalizationStats":
        idx = np.asarray(idx)
        return NormalizationStats(self.mean[idx], self.std[idx], self.log_flags[idx])

    def standardize(self, x):
        x = np.array(x, dtype=np.float64, copy=True)
        flat = x.reshape(-1, self.dim)
        _apply_log(flat, self.log_flags)
        flat -= self.mean
        flat /= self.std
        return x

    def destandardize(self, xbar):
        xbar = np.array(xbar, dtype=np.float64, copy=True)
        flat = xbar.reshape(-1, self.dim)
        flat *= self.std
        flat += self.mean
        if self.log_flags.any():
            flat[:, self.log_flags] = np.exp(flat[:, self.log_flags])
        return xbar

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "log_flags": [bool(f) for f in self.log_flags],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        return cls(d["mean"], d["std"], d["log_flags"])

    def __eq__(self, other):
        return (
            isinstance(other, NormalizationStats)
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.std, other.std)
            and np.array_equal(self.log_flags, other.log_flags)
        )


def _apply_log(flat: np.ndarray, log_flags) -> None:
    if log_flags is not None and np.any(log_flags):
        cols = flat[:, log_flags]
        if np.any(cols <= 0.0):
            raise ValueError("log-flagged components must be strictly positive")
        flat[:, log_flags] = np.log(cols)


def standardize(x, stats: NormalizationStats):
    return stats.standardize(x)


def destandardize(xbar, stats: NormalizationStats):
    return stats.destandardize(xbar)
