"""Variational encoder over inputs and the inverse decoder.

The encoder maps a (standardized) input v to a diagonal Gaussian over the
latent space that restores bijectivity; the decoder maps [output, latent]
back to an input estimate. Both train jointly on a penalized objective:
KL to the standard-normal prior, reconstruction error, and optionally a
consistency term through a frozen forward emulator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .emulator import EmulatorModel
from .nets import DenseNet, DenseNetSpec
from .optim import TrainConfig, train_minibatches
from .rng import Rng
from .scaling import NormalizationStats

SIGMA_FLOOR = 1e-6
COLLAPSE_TAU_PER_DIM = 1e-3
MONITOR_MIN_EPOCHS = 20


@dataclass(frozen=True)
class PenaltyConfig:
    """Non-negative weights for the composite objective terms."""

    lambda_e: float = 1.0
    lambda_v: float = 1.0
    lambda_f: float = 1.0
    lambda_d: float = 1.0
    lambda_r: float = 0.0

    def __post_init__(self):
        for name in ("lambda_e", "lambda_v", "lambda_f", "lambda_d", "lambda_r"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class VaeSpec:
    enc_width: int
    enc_depth: int
    enc_activation: str
    dec_width: int
    dec_depth: int
    dec_activation: str
    latent_dim: int

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")


class VariationalEncoder:
    """Net emitting [mu, rho]; sigma = exp(rho/2) floored at SIGMA_FLOOR."""

    def __init__(self, net: DenseNet, dim_w: int):
        if net.spec.out_dim != 2 * dim_w:
            raise ValueError("encoder net must emit 2 * latent_dim values")
        self.net = net
        self.dim_w = dim_w

    def heads(self, v_std: Tensor):
        """Tape path: (mu, sigma, rho) tensors."""
        out = self.net(v_std)
        mu = ad.slice_last(out, 0, self.dim_w)
        rho = ad.slice_last(out, self.dim_w, 2 * self.dim_w)
        sigma = ad.maximum_const(ad.exp(ad.mul(rho, 0.5)), SIGMA_FLOOR)
        return mu, sigma, rho


def encode(encoder: VariationalEncoder, v_std) -> tuple[np.ndarray, np.ndarray]:
    """Posterior parameters for standardized inputs; sigma > 0 always."""
    v_std = np.atleast_2d(np.asarray(v_std, dtype=np.float64))
    mu, sigma, _ = encoder.heads(Tensor(v_std))
    return mu.data, sigma.data


def reparam(mu, sigma, eps):
    """w = mu + sigma * eps; differentiable in (mu, sigma) on the tape."""
    if isinstance(mu, Tensor) or isinstance(sigma, Tensor):
        return ad.add(mu, ad.mul(sigma, eps))
    return np.asarray(mu) + np.asarray(sigma) * np.asarray(eps)


def kl_loss(mu, sigma):
    """Closed-form KL of diag-Gaussian batches against the standard normal:
    mean over rows of 0.5 * sum(mu^2 + sigma^2 - log sigma^2 - 1)."""
    if isinstance(mu, Tensor) or isinstance(sigma, Tensor):
        mu = mu if isinstance(mu, Tensor) else Tensor(mu)
        sigma = sigma if isinstance(sigma, Tensor) else Tensor(sigma)
        if np.any(sigma.data <= 0.0):
            raise ValueError("kl_loss needs sigma > 0")
        var = ad.square(sigma)
        inner = ad.sub(ad.sub(ad.add(ad.square(mu), var), ad.log(var)), 1.0)
        return ad.mul(ad.tmean(ad.tsum(inner, axis=1)), 0.5)
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
    if np.any(sigma <= 0.0):
        raise ValueError("kl_loss needs sigma > 0")
    inner = mu**2 + sigma**2 - np.log(sigma**2) - 1.0
    return float(0.5 * np.mean(np.sum(inner, axis=1)))


class Decoder:
    """Net mapping [standardized output, latent] -> standardized input."""

    def __init__(self, net: DenseNet, stats_v: NormalizationStats,
                 stats_y: NormalizationStats):
        self.net = net
        self.stats_v = stats_v
        self.stats_y = stats_y

    @property
    def dim_w(self) -> int:
        return self.net.spec.in_dim - self.stats_y.dim


def decode(decoder: Decoder, y, w) -> np.ndarray:
    """Physical-units inverse estimate; y may be one row shared by all w."""
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if y.shape[0] == 1 and w.shape[0] > 1:
        y = np.broadcast_to(y, (w.shape[0], y.shape[1]))
    if y.shape[0] != w.shape[0]:
        raise ValueError("y and w row counts differ")
    if w.shape[1] != decoder.dim_w:
        raise ValueError(f"w has {w.shape[1]} columns, expected {decoder.dim_w}")
    x = np.concatenate([decoder.stats_y.standardize(y), w], axis=1)
    v_std = decoder.net(Tensor(x)).data
    return decoder.stats_v.destandardize(v_std)


@dataclass
class CollapseDiagnosis:
    collapsed: bool
    epoch: int | None = None
    advisory: str = ""


def collapse_monitor(lv_history, ld_history=None, dim_w: int = 1,
                     tau: float | None = None) -> CollapseDiagnosis:
    """Flags posterior collapse: the KL term fell below tau while the
    reconstruction loss is still improving (no plateau)."""
    lv = np.asarray(lv_history, dtype=np.float64)
    if lv.size < MONITOR_MIN_EPOCHS:
        raise ValueError(f"need at least {MONITOR_MIN_EPOCHS} epochs of KL history")
    if tau is None:
        tau = COLLAPSE_TAU_PER_DIM * dim_w
    below = np.nonzero(lv < tau)[0]
    if below.size == 0 or lv[-1] >= tau:
        return CollapseDiagnosis(False)
    if ld_history is not None:
        ld = np.asarray(ld_history, dtype=np.float64)
        if ld.size >= 20:
            # plateau test: mean of the last 10 epochs vs the 10 before;
            # a relative drop above 1% counts as still improving
            prev = ld[-20:-10].mean()
            recent = ld[-10:].mean()
            improving = (prev - recent) > 0.01 * max(abs(prev), 1e-12)
            if not improving:
                return CollapseDiagnosis(False)
    advisory = (
        "latent posterior matches the prior while reconstruction is still "
        "improving; raise the reconstruction weight (lambda_d) relative to "
        "lambda_v (keep lambda_r fixed) and retrain"
    )
    return CollapseDiagnosis(True, int(below[0]), advisory)


@dataclass
class VaeDataset:
    """Standardized training arrays for the encoder/decoder objective.

    For flow-map emulators the consistency term uses the record's own
    auxiliary block: aux_std rows and the emulator-standardized target.
    v_param_count tells how many leading v components feed the emulator.
    """

    v_std: np.ndarray
    y_std: np.ndarray
    aux_std: np.ndarray | None = None
    lr_target_std: np.ndarray | None = None
    v_param_count: int | None = None

    @property
    def n(self) -> int:
        return self.v_std.shape[0]


@dataclass
class VaeTrainResult:
    encoder: VariationalEncoder
    decoder: Decoder
    history: list = field(default_factory=list)
    collapse_epoch: int | None = None
    diagnosis: CollapseDiagnosis | None = None


def train_vae_decoder(data: VaeDataset, emulator: EmulatorModel | None,
                      spec: VaeSpec, penalties: PenaltyConfig, cfg: TrainConfig,
                      rng: Rng, stats_v: NormalizationStats | None = None,
                      stats_y: NormalizationStats | None = None,
                      monitor: bool = True) -> VaeTrainResult:
    """Joint fit of encoder and decoder on
    lambda_v * KL + lambda_d * reconstruction + lambda_r * consistency.

    Fresh noise per sample each visit; the emulator stays frozen inside the
    consistency term and is never touched when lambda_r is 0.
    """
    dv = data.v_std.shape[1]
    dy = data.y_std.shape[1]
    dw = spec.latent_dim
    if penalties.lambda_r > 0:
        if emulator is None:
            raise ValueError("lambda_r > 0 needs a trained emulator")
        if data.lr_target_std is None:
            raise ValueError("lambda_r > 0 needs consistency targets")
    k = data.v_param_count if data.v_param_count is not None else dv

    enc = VariationalEncoder(
        DenseNet(DenseNetSpec(dv, spec.enc_width, spec.enc_depth,
                              spec.enc_activation, 2 * dw), rng.substream(0)),
        dw,
    )
    dec_net = DenseNet(DenseNetSpec(dy + dw, spec.dec_width, spec.dec_depth,
                                    spec.dec_activation, dv), rng.substream(1))
    dec = Decoder(
        dec_net,
        stats_v if stats_v is not None else NormalizationStats.identity(dv),
        stats_y if stats_y is not None else NormalizationStats.identity(dy),
    )

    params = enc.net.params() + dec_net.params()
    noise_rng = rng.substream(2)
    state = {"collapse_epoch": None, "diagnosis": None}

    def loss_fn(idx, epoch):
        vb = Tensor(data.v_std[idx])
        yb = Tensor(data.y_std[idx])
        mu, sigma, rho = enc.heads(vb)
        # KL in the rho parameterization: 0.5 (mu^2 + e^rho - rho - 1)
        kl_inner = ad.sub(ad.sub(ad.add(ad.square(mu), ad.exp(rho)), rho), 1.0)
        lv = ad.mul(ad.tmean(ad.tsum(kl_inner, axis=1)), 0.5)
        eps = noise_rng.gaussian((len(idx), dw))
        w = reparam(mu, sigma, eps)
        vhat = dec_net(ad.concat([yb, w]))
        ld = ad.tmean(ad.tsum(ad.square(ad.sub(vhat, vb)), axis=1))
        terms = {"lv": float(lv.data), "ld": float(ld.data)}
        total = ad.add(ad.mul(lv, penalties.lambda_v), ad.mul(ld, penalties.lambda_d))
        if penalties.lambda_r > 0:
            x = ad.slice_last(vhat, 0, k)
            if data.aux_std is not None:
                x = ad.concat([x, Tensor(data.aux_std[idx])])
            yhat = emulator.net(x)
            lr_term = ad.tmean(ad.tsum(
                ad.square(ad.sub(yhat, Tensor(data.lr_target_std[idx]))), axis=1))
            total = ad.add(total, ad.mul(lr_term, penalties.lambda_r))
            terms["lr"] = float(lr_term.data)
        else:
            terms["lr"] = 0.0
        terms["total"] = float(total.data)
        return total, terms

    def epoch_hook(epoch, means, history):
        if not monitor or state["collapse_epoch"] is not None:
            return
        if epoch + 1 < MONITOR_MIN_EPOCHS:
            return
        diag = collapse_monitor([h["lv"] for h in history],
                                [h["ld"] for h in history], dim_w=dw)
        if diag.collapsed:
            state["collapse_epoch"] = epoch
            state["diagnosis"] = diag
            warnings.warn(f"posterior collapse flagged at epoch {epoch}: "
                          f"{diag.advisory}", RuntimeWarning, stacklevel=2)

    history = train_minibatches(data.n, params, loss_fn, cfg, rng.substream(3),
                                epoch_hook=epoch_hook)
    return VaeTrainResult(enc, dec, history, state["collapse_epoch"],
                          state["diagnosis"])
