"""Deterministic forward surrogates.

Direct mode learns input -> output. Residual mode learns the one-step state
update y(t_n) = y(t_{n-1}) + net(inputs, lagged states [, neighbor states]),
so a zero network is exactly the identity flow map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nets import DenseNet, DenseNetSpec
from .optim import TrainConfig, train_minibatches
from .rng import Rng
from .scaling import NormalizationStats

MODES = ("direct", "residual")
ROLLOUT_GUARD_FACTOR = 10.0


@dataclass(frozen=True)
class AuxLayout:
    """Auxiliary-input layout: lagged states oldest-first, then neighbor
    states (order N, S, E, W, NE, NW, SE, SW) at the most recent lag."""

    n_lags: int
    state_dim: int
    n_neighbors: int = 0

    def __post_init__(self):
        if self.n_lags < 1 or self.state_dim < 1 or self.n_neighbors < 0:
            raise ValueError("invalid AuxLayout")

    @property
    def width(self) -> int:
        return self.state_dim * (self.n_lags + self.n_neighbors)

    @property
    def last_lag(self) -> slice:
        return slice((self.n_lags - 1) * self.state_dim, self.n_lags * self.state_dim)


@dataclass(frozen=True)
class EmulatorSpec:
    mode: str
    width: int
    depth: int
    activation: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass
class EmulatorDataset:
    """Training rows: conditioning inputs v, optional auxiliary block, state y."""

    v: np.ndarray
    y: np.ndarray
    aux: np.ndarray | None = None
    layout: AuxLayout | None = None
    log_flags_v: np.ndarray | None = None
    scaling: bool = True

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.aux is not None:
            self.aux = np.asarray(self.aux, dtype=np.float64)
            if self.layout is None or self.aux.shape[1] != self.layout.width:
                raise ValueError("aux block does not match its layout")
        if self.v.shape[0] != self.y.shape[0]:
            raise ValueError("v and y row counts differ")

    @property
    def n(self) -> int:
        return self.v.shape[0]


class EmulatorModel:
    """Trained surrogate plus the standardization needed to call it."""

    def __init__(self, net: DenseNet, mode: str, stats_v: NormalizationStats,
                 stats_out: NormalizationStats, stats_aux: NormalizationStats | None = None,
                 layout: AuxLayout | None = None, state_range: np.ndarray | None = None):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if mode == "residual" and (layout is None or stats_aux is None):
            raise ValueError("residual mode needs an aux layout and aux stats")
        self.net = net
        self.mode = mode
        self.stats_v = stats_v
        self.stats_out = stats_out
        self.stats_aux = stats_aux
        self.layout = layout
        # per-component training range of y, used by the rollout guard
        self.state_range = state_range

    @property
    def v_dim(self) -> int:
        return self.stats_v.dim

    @property
    def y_dim(self) -> int:
        return self.stats_out.dim


def emulate(model: EmulatorModel, v, aux=None) -> np.ndarray:
    """Forward pass in physical units; pure function of (model, v, aux)."""
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    if v.shape[1] != model.v_dim:
        raise ValueError(f"v has {v.shape[1]} components, expected {model.v_dim}")
    if model.mode == "direct":
        if aux is not None and np.size(aux) > 0:
            raise ValueError("direct mode takes no auxiliary data")
        out = model.net(Tensor(model.stats_v.standardize(v))).data
        return model.stats_out.destandardize(out)
    if aux is None:
        raise ValueError("residual mode needs auxiliary data")
    aux = np.atleast_2d(np.asarray(aux, dtype=np.float64))
    if aux.shape[1] != model.layout.width:
        raise ValueError(
            f"aux has {aux.shape[1]} columns, layout expects {model.layout.width}"
        )
    x = np.concatenate(
        [model.stats_v.standardize(v), model.stats_aux.standardize(aux)], axis=1
    )
    delta = model.net(Tensor(x)).data * model.stats_out.std
    return aux[:, model.layout.last_lag] + delta


@dataclass
class EmulatorTrainResult:
    model: EmulatorModel
    history: list = field(default_factory=list)
    heldout: dict = field(default_factory=dict)


def train_emulator(data: EmulatorDataset, spec: EmulatorSpec, cfg: TrainConfig,
                   rng: Rng, train_idx=None, test_idx=None) -> EmulatorTrainResult:
    """Mean-squared-error fit with Adam and the exponential LR schedule.

    Stats are fit on the training rows only. Residual mode regresses the
    standardized increment y - y(t-dt) with a scale-only standardization.
    """
    if train_idx is None:
        train_idx = np.arange(data.n)
    train_idx = np.asarray(train_idx)

    if data.scaling:
        stats_v = NormalizationStats.fit(data.v[train_idx], log_flags=data.log_flags_v)
    else:
        stats_v = NormalizationStats.identity(data.v.shape[1], log_flags=data.log_flags_v)

    stats_aux = None
    aux_std = None
    if spec.mode == "residual":
        layout = data.layout
        if layout is None:
            raise ValueError("residual mode needs aux data with a layout")
        if data.scaling:
            stats_aux = NormalizationStats.fit(data.aux[train_idx])
        else:
            stats_aux = NormalizationStats.identity(data.aux.shape[1])
        aux_std = stats_aux.standardize(data.aux)
        delta = data.y - data.aux[:, layout.last_lag]
        if data.scaling:
            stats_out = NormalizationStats.fit(delta[train_idx], scale_only=True)
        else:
            stats_out = NormalizationStats.identity(data.y.shape[1])
        target_std = delta / stats_out.std
        x_std = np.concatenate([stats_v.standardize(data.v), aux_std], axis=1)
        in_dim = data.v.shape[1] + layout.width
    else:
        if data.scaling:
            stats_out = NormalizationStats.fit(data.y[train_idx])
        else:
            stats_out = NormalizationStats.identity(data.y.shape[1])
        target_std = stats_out.standardize(data.y)
        x_std = stats_v.standardize(data.v)
        in_dim = data.v.shape[1]
        layout = None

    net = DenseNet(
        DenseNetSpec(in_dim, spec.width, spec.depth, spec.activation, data.y.shape[1]),
        rng.substream(0),
    )

    def loss_fn(idx, epoch):
        pred = net(Tensor(x_std[idx]))
        err = ad.sub(pred, Tensor(target_std[idx]))
        loss = ad.tmean(ad.tsum(ad.square(err), axis=1))
        return loss, {"mse": float(loss.data)}

    history = train_minibatches(len(train_idx), net.params(),
                                lambda idx, ep: loss_fn(train_idx[idx], ep),
                                cfg, rng.substream(1))

    lo = data.y[train_idx].min(axis=0)
    hi = data.y[train_idx].max(axis=0)
    model = EmulatorModel(net, spec.mode, stats_v, stats_out, stats_aux, layout,
                          state_range=np.stack([lo, hi]))
    heldout = {}
    if test_idx is not None and len(test_idx) > 0:
        test_idx = np.asarray(test_idx)
        aux_t = data.aux[test_idx] if data.aux is not None else None
        heldout = eval_emulator(model, data.v[test_idx], data.y[test_idx], aux_t)
    return EmulatorTrainResult(model, history, heldout)


def eval_emulator(model: EmulatorModel, v, y, aux=None) -> dict:
    """One-step prediction errors in physical units."""
    pred = emulate(model, v, aux)
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    err = np.linalg.norm(pred - y, axis=1)
    denom = np.maximum(np.linalg.norm(y, axis=1), 1e-12)
    rel = err / denom
    return {
        "mse": float(np.mean(np.sum((pred - y) ** 2, axis=1))),
        "rel_l2_mean": float(rel.mean()),
        "rel_l2_median": float(np.median(rel)),
        "rel_l2_max": float(rel.max()),
        "n": int(y.shape[0]),
    }


@dataclass
class RolloutResult:
    trajectory: np.ndarray
    flagged: bool = False
    steps_done: int = 0


def rollout(model: EmulatorModel, seed_states, params, steps: int) -> RolloutResult:
    """Autoregressive residual-mode rollout from n_lags exact seed states.

    ``params`` is one row reused at every step, or (steps, dv) rows when a
    component of the net's input varies along the trajectory (e.g. the target
    time of each predicted state). Divergence guard: any state component
    exceeding 10x its training range in magnitude truncates and flags.
    """
    if model.mode != "residual":
        raise ValueError("rollout requires a residual-mode emulator")
    if model.layout.n_neighbors != 0:
        raise ValueError("rollout supports lag-only layouts")
    seed_states = np.atleast_2d(np.asarray(seed_states, dtype=np.float64))
    n_lags, dy = model.layout.n_lags, model.layout.state_dim
    if seed_states.shape != (n_lags, dy):
        raise ValueError(f"seed states must be shaped ({n_lags}, {dy})")
    params = np.atleast_2d(np.asarray(params, dtype=np.float64))
    if params.shape[0] == 1:
        params = np.broadcast_to(params, (max(steps, 1), params.shape[1]))
    elif params.shape[0] != steps:
        raise ValueError("params must be a single row or one row per step")
    span = model.state_range[1] - model.state_range[0]
    bound = ROLLOUT_GUARD_FACTOR * span
    traj = np.empty((n_lags + steps, dy))
    traj[:n_lags] = seed_states
    for i in range(steps):
        window = traj[i : i + n_lags].reshape(1, -1)
        nxt = emulate(model, params[i : i + 1], window)[0]
        if np.any(np.abs(nxt) > bound) or not np.all(np.isfinite(nxt)):
            return RolloutResult(traj[: n_lags + i].copy(), flagged=True, steps_done=i)
        traj[n_lags + i] = nxt
    return RolloutResult(traj, flagged=False, steps_done=steps)
