"""Affine-coupling normalizing flows with exact algebraic inverses.

A stack of couplings maps base Gaussians to data (generative direction);
densities are evaluated through the inverse pass. Couplings alternate which
contiguous coordinate block passes through unchanged. Scalar targets are
augmented with independent standard-normal columns so the coupling split is
well defined; augmentation columns are dropped on sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import NumericError
from .nets import DenseNet, DenseNetSpec
from .optim import TrainConfig, train_minibatches
from .rng import Rng
from .scaling import NormalizationStats

S_CLAMP = 8.0  # scale exponent bound via s = S_CLAMP * tanh(raw / S_CLAMP)
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class FlowSpec:
    """Coupling-subnet shape and stack size."""

    width: int
    depth: int
    couplings: int
    batchnorm: bool = False
    augment: int | None = None  # None = auto: 1 for scalar targets, else 0
    activation: str = "silu"

    def __post_init__(self):
        if self.couplings < 2:
            raise ValueError("a flow needs at least 2 couplings")


class CouplingLayer:
    """One affine coupling: the pass block conditions a scale/shift of the rest.

    parity 0 passes coords [0, m*) through; parity 1 passes [m*, m).
    """

    def __init__(self, m: int, m_star: int, parity: int, width: int, depth: int,
                 activation: str, rng: Rng):
        if not 0 < m_star < m:
            raise ValueError("need 0 < m_star < m")
        self.m = m
        self.m_star = m_star
        self.parity = parity % 2
        pass_dim = m_star if self.parity == 0 else m - m_star
        act_dim = m - pass_dim
        self.s_net = DenseNet(
            DenseNetSpec(pass_dim, width, depth, activation, act_dim), rng, zero_last=True
        )
        self.t_net = DenseNet(
            DenseNetSpec(pass_dim, width, depth, activation, act_dim), rng, zero_last=True
        )

    def params(self):
        return self.s_net.params() + self.t_net.params()

    def _split(self, z: Tensor):
        if self.parity == 0:
            return ad.slice_last(z, 0, self.m_star), ad.slice_last(z, self.m_star, self.m)
        return ad.slice_last(z, self.m_star, self.m), ad.slice_last(z, 0, self.m_star)

    def _join(self, passed: Tensor, active: Tensor) -> Tensor:
        if self.parity == 0:
            return ad.concat([passed, active])
        return ad.concat([active, passed])

    def _scale_shift(self, passed: Tensor):
        raw = self.s_net(passed)
        s = ad.mul(ad.tanh(ad.mul(raw, 1.0 / S_CLAMP)), S_CLAMP)
        if not np.all(np.isfinite(s.data)):
            raise NumericError("non-finite scale output in coupling layer")
        t = self.t_net(passed)
        return s, t


def coupling_forward(layer: CouplingLayer, z):
    """Generative direction: (z', per-row logdet)."""
    z = z if isinstance(z, Tensor) else Tensor(z)
    if z.data.shape[-1] != layer.m:
        raise ValueError(f"expected dim {layer.m}, got {z.data.shape[-1]}")
    passed, active = layer._split(z)
    s, t = layer._scale_shift(passed)
    active2 = ad.add(ad.mul(active, ad.exp(s)), t)
    return layer._join(passed, active2), ad.tsum(s, axis=1)


def _coupling_inverse(layer: CouplingLayer, z2):
    z2 = z2 if isinstance(z2, Tensor) else Tensor(z2)
    if z2.data.shape[-1] != layer.m:
        raise ValueError(f"expected dim {layer.m}, got {z2.data.shape[-1]}")
    passed, active2 = layer._split(z2)
    s, t = layer._scale_shift(passed)
    active = ad.mul(ad.sub(active2, t), ad.exp(ad.neg(s)))
    return layer._join(passed, active), ad.neg(ad.tsum(s, axis=1))


def coupling_inverse(layer: CouplingLayer, z2) -> Tensor:
    """Exact inverse of coupling_forward."""
    z, _ = _coupling_inverse(layer, z2)
    return z


class RunningNorm:
    """Invertible normalization between couplings (optional, default off).

    The density-direction pass normalizes with batch statistics while
    training (updating running stats); generation denormalizes with the
    running statistics.
    """

    def __init__(self, m: int, eps: float = 1e-5, momentum: float = 0.1):
        self.m = m
        self.eps = eps
        self.momentum = momentum
        self.running_mean = np.zeros(m)
        self.running_var = np.ones(m)

    def inverse(self, y: Tensor, update: bool):
        if update:
            mean = ad.tmean(y, axis=0)
            var = ad.tmean(ad.square(ad.sub(y, mean)), axis=0)
            rm, rv = mean.data, var.data
            self.running_mean += self.momentum * (rm - self.running_mean)
            self.running_var += self.momentum * (rv - self.running_var)
        else:
            mean = Tensor(self.running_mean)
            var = Tensor(self.running_var)
        denom = ad.sqrt(ad.add(var, self.eps))
        z = ad.div(ad.sub(y, mean), denom)
        logdet = ad.mul(ad.tsum(ad.log(ad.add(var, self.eps))), -0.5)
        b = y.data.shape[0]
        return z, ad.mul(Tensor(np.ones(b)), logdet)

    def forward(self, z: Tensor):
        var = Tensor(self.running_var)
        denom = ad.sqrt(ad.add(var, self.eps))
        y = ad.add(ad.mul(z, denom), Tensor(self.running_mean))
        logdet = ad.mul(ad.tsum(ad.log(ad.add(var, self.eps))), 0.5)
        b = z.data.shape[0]
        return y, ad.mul(Tensor(np.ones(b)), logdet)


class FlowStack:
    """K alternating couplings over dim m = data_dim + augment."""

    def __init__(self, data_dim: int, spec: FlowSpec, rng: Rng,
                 stats: NormalizationStats | None = None):
        n_aug = spec.augment
        if n_aug is None:
            n_aug = 1 if data_dim == 1 else 0
        if data_dim + n_aug < 2:
            raise ValueError("flow dimension (data + augment) must be >= 2")
        self.data_dim = data_dim
        self.n_aug = n_aug
        self.m = data_dim + n_aug
        self.m_star = math.ceil(self.m / 2)
        self.spec = spec
        self.stats = stats
        self.layers = [
            CouplingLayer(self.m, self.m_star, k % 2, spec.width, spec.depth,
                          spec.activation, rng)
            for k in range(spec.couplings)
        ]
        self.norms = [RunningNorm(self.m) for _ in self.layers] if spec.batchnorm else None
        self._update_norms = False  # switched on by train_flow while fitting

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def forward_all(self, z):
        """Generative pass over the whole stack: (y, per-row logdet)."""
        z = z if isinstance(z, Tensor) else Tensor(z)
        total = Tensor(np.zeros(z.data.shape[0]))
        for k, layer in enumerate(self.layers):
            z, ld = coupling_forward(layer, z)
            total = ad.add(total, ld)
            if self.norms is not None:
                z, ld = self.norms[k].forward(z)
                total = ad.add(total, ld)
        return z, total

    def inverse_all(self, y, update_norms: bool | None = None):
        """Density-direction pass: (z0, per-row inverse logdet)."""
        update = self._update_norms if update_norms is None else update_norms
        y = y if isinstance(y, Tensor) else Tensor(y)
        total = Tensor(np.zeros(y.data.shape[0]))
        for k in range(len(self.layers) - 1, -1, -1):
            if self.norms is not None:
                y, ld = self.norms[k].inverse(y, update=update)
                total = ad.add(total, ld)
            y, ld = _coupling_inverse(self.layers[k], y)
            total = ad.add(total, ld)
        return y, total


def log_density(flow: FlowStack, y):
    """Per-row log density in the flow's standardized (and augmented) space."""
    if not isinstance(y, Tensor):
        y = Tensor(np.atleast_2d(np.asarray(y, dtype=np.float64)))
    if y.data.ndim != 2 or y.data.shape[1] != flow.m:
        raise ValueError(
            f"log_density expects {flow.m} columns (data {flow.data_dim} + "
            f"augment {flow.n_aug})"
        )
    z0, logdet_inv = flow.inverse_all(y)
    base = ad.add(ad.mul(ad.tsum(ad.square(z0), axis=1), -0.5),
                  -0.5 * flow.m * LOG_2PI)
    return ad.add(base, logdet_inv)


def sample(flow: FlowStack, n: int, rng: Rng) -> np.ndarray:
    """Draw n rows: base Gaussians pushed through the stack, augmentation
    dropped, destandardized to physical units when stats are attached."""
    if n == 0:
        return np.zeros((0, flow.data_dim))
    z0 = rng.gaussian((n, flow.m))
    y, _ = flow.forward_all(Tensor(z0))
    out = y.data[:, : flow.data_dim]
    if flow.stats is not None:
        out = flow.stats.destandardize(out)
    return out


@dataclass
class FlowTrainResult:
    flow: FlowStack
    history: list = field(default_factory=list)

    @property
    def final_nll(self) -> float:
        return self.history[-1]["nll"] if self.history else float("nan")


def train_flow(samples: np.ndarray, spec: FlowSpec, cfg: TrainConfig, rng: Rng,
               stats: NormalizationStats | None = None) -> FlowTrainResult:
    """Fit a FlowStack by minimizing the negative mean log-likelihood.

    ``samples`` are physical training rows. When ``stats`` is None they are
    fit here (the caller passes the training split only); pass
    ``NormalizationStats.identity(dim)`` to train on raw values. Augmentation
    columns are redrawn fresh each epoch.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ValueError("train_flow needs at least 2 sample rows")
    data_dim = samples.shape[1]
    if stats is None:
        stats = NormalizationStats.fit(samples)
    flow = FlowStack(data_dim, spec, rng.substream(0), stats=stats)
    base = stats.standardize(samples)
    n = base.shape[0]
    data_rng = rng.substream(1)
    epoch_state = {"epoch": -1, "data": base}

    def loss_fn(idx, epoch):
        if flow.n_aug > 0 and epoch_state["epoch"] != epoch:
            aug = data_rng.gaussian((n, flow.n_aug))
            epoch_state["data"] = np.concatenate([base, aug], axis=1)
            epoch_state["epoch"] = epoch
        batch = Tensor(epoch_state["data"][idx])
        lp = log_density(flow, batch)
        nll = ad.neg(ad.tmean(lp))
        return nll, {"nll": float(nll.data)}

    flow._update_norms = True  # batch-norm running stats update while fitting
    try:
        history = train_minibatches(n, flow.params(), loss_fn, cfg, rng.substream(2))
    finally:
        flow._update_norms = False
    return FlowTrainResult(flow, history)
