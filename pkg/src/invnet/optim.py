"""Adam with decoupled weight decay, the exponential LR schedule, and the
shared mini-batch training loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend as K
from .autodiff import Tape, Tensor, backward
from .errors import NumericError
from .rng import Rng


@dataclass
class AdamState:
    """Per-parameter moment estimates plus the shared step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0

    @classmethod
    def init(cls, params, **kwargs) -> "AdamState":
        return cls(
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
            **kwargs,
        )


def adam_step(params, grads, state: AdamState, lr: float):
    """One Adam update, in place on the parameter tensors.

    Bias-corrected first/second moments; weight decay is decoupled (a direct
    multiplicative shrink of the parameters, not a gradient term).
    """
    if lr <= 0.0:
        raise ValueError("lr must be positive")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient in adam_step")
    state.step += 1
    for p, g, m, v in zip(params, grads, state.m, state.v):
        K.adam_update(
            p.data, g, m, v, state.step, lr,
            state.beta1, state.beta2, state.eps, state.weight_decay,
        )
    return params, state


def lr_at(eta0: float, gamma: float, epoch: int) -> float:
    """Exponential schedule eta0 * gamma**epoch."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    return eta0 * gamma**epoch


@dataclass
class TrainConfig:
    """Mini-batch training hyperparameters."""

    lr0: float
    gamma: float
    batch: int
    epochs: int
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.batch < 1 or self.epochs < 0:
            raise ValueError("batch >= 1 and epochs >= 0 required")


def train_minibatches(
    n: int,
    params: list[Tensor],
    loss_fn,
    cfg: TrainConfig,
    rng: Rng,
    epoch_hook=None,
) -> list[dict]:
    """Generic seeded loop: shuffle, batch, tape, backward, Adam.

    ``loss_fn(idx, epoch) -> (scalar Tensor, dict of float terms)`` builds the
    batch loss on the active tape. Returns per-epoch histories of the batch-
    averaged terms. Raises NumericError naming the epoch on a non-finite loss.
    """
    state = AdamState.init(params, weight_decay=cfg.weight_decay)
    history: list[dict] = []
    for epoch in range(cfg.epochs):
        lr = lr_at(cfg.lr0, cfg.gamma, epoch)
        perm = rng.permutation(n)
        sums: dict[str, float] = {}
        batches = 0
        for start in range(0, n, cfg.batch):
            idx = perm[start : start + cfg.batch]
            with Tape():
                loss, terms = loss_fn(idx, epoch)
            if not np.isfinite(loss.data):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            grads = backward(loss, params)
            adam_step(params, grads, state, lr)
            for k, val in terms.items():
                sums[k] = sums.get(k, 0.0) + float(val)
            batches += 1
        means = {k: s / batches for k, s in sums.items()}
        history.append(means)
        if epoch_hook is not None:
            epoch_hook(epoch, means, history)
    return history
