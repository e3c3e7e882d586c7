"""Latent-sampling strategies used when interrogating a trained model.

Given an observation y*, the inverse estimate is decode([y*, w]) over a set
of latent draws w. The strategies here produce those draws: the standard
normal prior, predictor-corrector refinement, high-density ranking against
the aggregate posterior, and a normalizing flow fit to encoder latents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .flows import FlowSpec, FlowStack, sample as flow_sample, train_flow
from .optim import TrainConfig
from .rng import Rng
from .scaling import NormalizationStats
from .vae import Decoder, VariationalEncoder, decode, encode, reparam

TAGS = ("prior", "pc", "hd", "nf", "nf+pc")


@dataclass
class LatentSampleSet:
    """Latent draws plus how they were produced."""

    samples: np.ndarray
    tag: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.tag not in TAGS:
            raise ValueError(f"unknown strategy tag {self.tag!r}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("latent samples must be finite")

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def sample_prior(dim: int, n: int, rng: Rng) -> LatentSampleSet:
    """n i.i.d. rows from N(0, I_dim)."""
    if n < 0 or dim < 1:
        raise ValueError("need n >= 0 and dim >= 1")
    w = rng.gaussian((n, dim))
    return LatentSampleSet(w.reshape(n, dim), "prior", {"n": n})


def pc_sampling(decoder: Decoder, encoder: VariationalEncoder, ystar,
                w0: LatentSampleSet, R: int):
    """Predictor-corrector refinement of latent draws.

    Decode, re-encode the estimate keeping only the posterior mean, decode
    again; R round trips. Rows that go non-finite are dropped and their
    original indices recorded in the returned set's provenance.
    """
    if R < 0:
        raise ValueError("R must be >= 0")
    if w0.n == 0:
        raise ValueError("w0 must be nonempty")
    keep = np.arange(w0.n)
    dropped: list[int] = []
    w = w0.samples
    vhat = decode(decoder, ystar, w)
    for r in range(R + 1):
        good = np.all(np.isfinite(w), axis=1) & np.all(np.isfinite(vhat), axis=1)
        if not good.all():
            dropped.extend(int(i) for i in keep[~good])
            keep, w, vhat = keep[good], w[good], vhat[good]
        if r == R or vhat.shape[0] == 0:
            break
        w = encode(encoder, decoder.stats_v.standardize(vhat))[0]
        vhat = decode(decoder, ystar, w)
    tag = "nf+pc" if w0.tag == "nf" else "pc"
    prov = dict(w0.provenance)
    prov.update({"R": R, "dropped": dropped})
    return vhat, LatentSampleSet(w, tag, prov)


def _mixture_density(cands: np.ndarray, mu: np.ndarray, sigma: np.ndarray,
                     cand_chunk: int = 1024, comp_chunk: int = 512) -> np.ndarray:
    """Sum over components of N(w; mu_i, diag sigma_i^2), chunked in both
    candidates and components to bound memory."""
    d = cands.shape[1]
    log_norm = -0.5 * d * math.log(2.0 * math.pi) - np.sum(np.log(sigma), axis=1)
    dens = np.zeros(cands.shape[0])
    for c0 in range(0, cands.shape[0], cand_chunk):
        cb = cands[c0 : c0 + cand_chunk]
        acc = np.zeros(cb.shape[0])
        for s0 in range(0, mu.shape[0], comp_chunk):
            mb = mu[s0 : s0 + comp_chunk]
            sb = sigma[s0 : s0 + comp_chunk]
            z = (cb[:, None, :] - mb[None, :, :]) / sb[None, :, :]
            logp = log_norm[None, s0 : s0 + comp_chunk] - 0.5 * np.sum(z * z, axis=2)
            acc += np.exp(logp).sum(axis=1)
        dens[c0 : c0 + cand_chunk] = acc
    return dens


def hd_sampling(encoder: VariationalEncoder, v_std: np.ndarray, S: int, Q: int,
                top_n: int, rng: Rng) -> LatentSampleSet:
    """High-density selection: draw Q latents from each of S random posterior
    components, rank all S*Q candidates by the stacked (unnormalized) mixture
    density over the same S components, keep the top_n."""
    v_std = np.atleast_2d(np.asarray(v_std, dtype=np.float64))
    if S * Q == 0:
        raise ValueError("S and Q must be positive")
    if S > v_std.shape[0]:
        raise ValueError(f"S={S} exceeds the {v_std.shape[0]} available inputs")
    if top_n > S * Q:
        raise ValueError(f"top_n={top_n} exceeds S*Q={S * Q}")
    pick = rng.choice(v_std.shape[0], S, replace=False)
    mu, sigma = encode(encoder, v_std[pick])
    dw = mu.shape[1]
    eps = rng.gaussian((S, Q, dw))
    cands = (mu[:, None, :] + sigma[:, None, :] * eps).reshape(S * Q, dw)
    dens = _mixture_density(cands, mu, sigma)
    order = np.argsort(-dens, kind="stable")[:top_n]
    return LatentSampleSet(cands[order], "hd", {"S": S, "Q": Q, "top_n": top_n})


def nf_latent_sampling(encoder: VariationalEncoder, v_std: np.ndarray,
                       flow_spec: FlowSpec, flow_cfg: TrainConfig, n: int,
                       rng: Rng, draws_per_input: int = 1):
    """Fit a normalizing flow to reparameterized encoder latents, then sample.

    Returns the trained flow alongside n fresh draws from it. The flow works
    directly in latent coordinates (identity normalization), so a collapsed
    posterior yields a near-identity flow.
    """
    if draws_per_input < 1:
        raise ValueError("draws_per_input must be >= 1")
    v_std = np.atleast_2d(np.asarray(v_std, dtype=np.float64))
    mu, sigma = encode(encoder, v_std)
    dw = mu.shape[1]
    reps = np.repeat(mu, draws_per_input, axis=0), np.repeat(sigma, draws_per_input, axis=0)
    eps = rng.substream(0).gaussian(reps[0].shape)
    w_train = reparam(reps[0], reps[1], eps)
    result = train_flow(w_train, flow_spec, flow_cfg, rng.substream(1),
                        stats=NormalizationStats.identity(dw))
    w = flow_sample(result.flow, n, rng.substream(2))
    return result.flow, LatentSampleSet(
        w, "nf", {"n": n, "train_points": int(w_train.shape[0])})


def invert(decoder: Decoder, ystar, wset: LatentSampleSet) -> np.ndarray:
    """One physical-units input estimate per latent row, order preserved."""
    ystar = np.atleast_2d(np.asarray(ystar, dtype=np.float64))
    if not np.all(np.isfinite(ystar)):
        raise ValueError("ystar must be finite")
    if ystar.shape[1] != decoder.stats_y.dim:
        raise ValueError(f"ystar has {ystar.shape[1]} components, "
                         f"expected {decoder.stats_y.dim}")
    if wset.n == 0:
        return np.zeros((0, decoder.stats_v.dim))
    if wset.dim != decoder.dim_w:
        raise ValueError("latent dimension mismatch with decoder")
    return decode(decoder, ystar, wset.samples)
