"""Scalar sine map y = sin(k x), non-identifiable once k x can wrap."""

from __future__ import annotations

import math

import numpy as np

from ..rng import Rng
from .base import Dataset

K_RANGE = (1.0, 3.0)
X_RANGE_NONPER = (-math.pi / 6.0, math.pi / 6.0)
X_RANGE_PERIODIC = (-math.pi, math.pi)


def sine_forward(v) -> np.ndarray:
    """v rows are (k, x); returns sin(k x) as a column."""
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    if v.shape[1] != 2:
        raise ValueError("v must have 2 components (k, x)")
    return np.sin(v[:, :1] * v[:, 1:2])


def generate(n_sims: int, rng: Rng, periodic: bool = False) -> Dataset:
    x_lo, x_hi = X_RANGE_PERIODIC if periodic else X_RANGE_NONPER
    k = rng.uniform(K_RANGE[0], K_RANGE[1], (n_sims, 1))
    x = rng.uniform(x_lo, x_hi, (n_sims, 1))
    v = np.concatenate([k, x], axis=1)
    return Dataset(
        tag="sine-periodic" if periodic else "sine-nonper",
        v=v,
        y=sine_forward(v),
        v_names=["k", "x"],
        y_names=["y"],
        scaling=True,
        meta={"prior": {"k": list(K_RANGE), "x": [x_lo, x_hi]}},
    )


def resolve_outputs(vhat, rng: Rng | None = None, **_) -> np.ndarray:
    return sine_forward(vhat)
