"""Rank-deficient linear map with a one-dimensional null space."""

from __future__ import annotations

import math

import numpy as np

from ..rng import Rng
from .base import Dataset

F_MATRIX = np.array([[math.pi, math.e, 0.0],
                     [0.0, math.e, math.pi]])
PRIOR_LO, PRIOR_HI = 0.0, 5.0


def linear_forward(v) -> np.ndarray:
    """y = F v for rows v in R^3."""
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    if v.shape[1] != 3:
        raise ValueError("v must have 3 components")
    return v @ F_MATRIX.T


def kernel() -> np.ndarray:
    """Unit vector spanning null(F), first component positive.

    From the two rows: pi*k0 + e*k1 = 0 and e*k1 + pi*k2 = 0, so
    k = [1, -pi/e, 1] up to normalization.
    """
    k = np.array([1.0, -math.pi / math.e, 1.0])
    return k / np.linalg.norm(k)


def generate(n_sims: int, rng: Rng, lo: float = PRIOR_LO,
             hi: float = PRIOR_HI) -> Dataset:
    v = rng.uniform(lo, hi, (n_sims, 3))
    return Dataset(
        tag="linear",
        v=v,
        y=linear_forward(v),
        v_names=["v1", "v2", "v3"],
        y_names=["y1", "y2"],
        scaling=True,
        meta={"prior": {"v": [lo, hi]}},
    )


def resolve_outputs(vhat, rng: Rng | None = None, **_) -> np.ndarray:
    """Exact re-solve used when verifying inverse estimates."""
    return linear_forward(vhat)
