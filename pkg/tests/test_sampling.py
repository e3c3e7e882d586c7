"""Latent-space sampling strategies and the decode step."""

import math

import numpy as np
import pytest

from invnet.flows import FlowSpec
from invnet.nets import DenseNet, DenseNetSpec
from invnet.optim import TrainConfig
from invnet.rng import Rng
from invnet.sampling import (
    LatentSampleSet,
    _mixture_density,
    hd_sampling,
    invert,
    nf_latent_sampling,
    pc_sampling,
    sample_prior,
)
from invnet.scaling import NormalizationStats
from invnet.vae import Decoder, VariationalEncoder, decode, encode


def _toy_pair(dv=2, dy=1, dw=2, seed=3):
    enc = VariationalEncoder(
        DenseNet(DenseNetSpec(dv, 8, 1, "silu", 2 * dw), Rng(seed)), dw)
    dec_net = DenseNet(DenseNetSpec(dy + dw, 8, 1, "silu", dv), Rng(seed + 1))
    dec = Decoder(dec_net, NormalizationStats.identity(dv),
                  NormalizationStats.identity(dy))
    return enc, dec


def test_prior_shape_tag_and_determinism():
    s1 = sample_prior(3, 100, Rng(5))
    s2 = sample_prior(3, 100, Rng(5))
    assert s1.samples.shape == (100, 3)
    assert s1.tag == "prior" and s1.provenance == {"n": 100}
    assert np.array_equal(s1.samples, s2.samples)
    assert abs(s1.samples.mean()) < 0.2
    with pytest.raises(ValueError):
        sample_prior(0, 10, Rng(0))


def test_sample_set_validation():
    with pytest.raises(ValueError):
        LatentSampleSet(np.zeros((2, 1)), "bogus")
    with pytest.raises(ValueError):
        LatentSampleSet(np.array([[np.nan]]), "prior")


def test_pc_zero_rounds_is_plain_decode():
    enc, dec = _toy_pair()
    w0 = sample_prior(2, 20, Rng(6))
    ystar = np.array([[0.4]])
    vhat, wset = pc_sampling(dec, enc, ystar, w0, R=0)
    assert np.array_equal(vhat, decode(dec, ystar, w0.samples))
    assert np.array_equal(wset.samples, w0.samples)
    assert wset.tag == "pc" and wset.provenance["R"] == 0
    assert wset.provenance["dropped"] == []


def test_pc_matches_documented_recursion():
    enc, dec = _toy_pair()
    w0 = sample_prior(2, 15, Rng(7))
    ystar = np.array([[0.4]])
    R = 3
    # independent re-derivation: decode, re-encode the mean, decode again
    w = w0.samples
    vhat = decode(dec, ystar, w)
    for _ in range(R):
        w = encode(enc, dec.stats_v.standardize(vhat))[0]
        vhat = decode(dec, ystar, w)
    got_v, got_w = pc_sampling(dec, enc, ystar, w0, R=R)
    assert np.array_equal(got_v, vhat)
    assert np.array_equal(got_w.samples, w)
    assert got_w.provenance["dropped"] == []


def test_pc_drops_nonfinite_rows():
    # decoder wired so out0 = w0 + w1; a row of float-max latents overflows
    # to inf while ordinary rows stay finite
    enc, _ = _toy_pair()
    dec_net = DenseNet(DenseNetSpec(3, 4, 1, "identity", 2), Rng(50))
    for p in dec_net.params():
        p.data[...] = 0.0
    dec_net.weights[0].data[1, 0] = 1.0
    dec_net.weights[0].data[2, 1] = 1.0
    dec_net.weights[1].data[0, 0] = 1.0
    dec_net.weights[1].data[1, 0] = 1.0
    dec = Decoder(dec_net, NormalizationStats.identity(2),
                  NormalizationStats.identity(1))
    big = np.finfo(np.float64).max
    w = Rng(8).gaussian((6, 2))
    w[2] = [big, big]
    w0 = LatentSampleSet(w, "prior")
    with np.errstate(all="ignore"):
        bad = decode(dec, np.array([[0.4]]), w[2:3])
        assert not np.all(np.isfinite(bad))
        vhat, wset = pc_sampling(dec, enc, np.array([[0.4]]), w0, R=1)
    assert wset.provenance["dropped"] == [2]
    assert vhat.shape[0] == wset.n == 5
    assert np.all(np.isfinite(vhat))


def test_pc_tag_chains_from_nf():
    enc, dec = _toy_pair()
    w0 = LatentSampleSet(Rng(9).gaussian((5, 2)), "nf", {"n": 5})
    _, wset = pc_sampling(dec, enc, np.array([[0.1]]), w0, R=1)
    assert wset.tag == "nf+pc"
    assert wset.provenance["n"] == 5  # upstream provenance carried along


def test_pc_validation():
    enc, dec = _toy_pair()
    w0 = sample_prior(2, 3, Rng(1))
    with pytest.raises(ValueError):
        pc_sampling(dec, enc, np.array([[0.0]]), w0, R=-1)
    empty = LatentSampleSet(np.zeros((0, 2)), "prior")
    with pytest.raises(ValueError):
        pc_sampling(dec, enc, np.array([[0.0]]), empty, R=1)


def test_mixture_density_chunking_is_exact():
    rng = Rng(12)
    cands = rng.gaussian((37, 3))
    mu = rng.gaussian((11, 3))
    sigma = np.exp(0.2 * rng.gaussian((11, 3)))
    a = _mixture_density(cands, mu, sigma)
    b = _mixture_density(cands, mu, sigma, cand_chunk=5, comp_chunk=2)
    assert np.allclose(a, b, rtol=1e-13, atol=0.0)


def test_hd_matches_brute_force_oracle():
    enc, _ = _toy_pair(dv=3, dw=2, seed=20)
    v_std = Rng(21).gaussian((40, 3))
    S, Q, top_n = 6, 4, 5

    got = hd_sampling(enc, v_std, S, Q, top_n, Rng(99))

    # replay the same rng stream and rank candidates with plain loops
    rng = Rng(99)
    pick = rng.choice(v_std.shape[0], S, replace=False)
    mu, sigma = encode(enc, v_std[pick])
    eps = rng.gaussian((S, Q, 2))
    cands = (mu[:, None, :] + sigma[:, None, :] * eps).reshape(S * Q, 2)
    dens = np.zeros(S * Q)
    for i in range(S * Q):
        for j in range(S):
            z2 = np.sum(((cands[i] - mu[j]) / sigma[j]) ** 2)
            norm = (2.0 * math.pi) ** -1.0 / np.prod(sigma[j])
            dens[i] += norm * math.exp(-0.5 * z2)
    order = np.argsort(-dens, kind="stable")[:top_n]

    assert got.tag == "hd"
    assert np.array_equal(got.samples, cands[order])
    assert got.provenance == {"S": S, "Q": Q, "top_n": top_n}


def test_hd_validation():
    enc, _ = _toy_pair()
    v_std = Rng(2).gaussian((10, 2))
    with pytest.raises(ValueError):
        hd_sampling(enc, v_std, S=11, Q=2, top_n=1, rng=Rng(0))
    with pytest.raises(ValueError):
        hd_sampling(enc, v_std, S=2, Q=2, top_n=5, rng=Rng(0))
    with pytest.raises(ValueError):
        hd_sampling(enc, v_std, S=0, Q=2, top_n=1, rng=Rng(0))


def test_nf_sampling_identity_stats_and_provenance():
    enc, _ = _toy_pair()
    v_std = Rng(30).gaussian((20, 2))
    flow, wset = nf_latent_sampling(
        enc, v_std, FlowSpec(6, 2, 2, augment=0),
        TrainConfig(lr0=5e-3, gamma=0.99, batch=16, epochs=3),
        n=7, rng=Rng(31), draws_per_input=3,
    )
    assert wset.tag == "nf" and wset.n == 7 and wset.dim == 2
    assert wset.provenance == {"n": 7, "train_points": 60}
    assert flow.stats == NormalizationStats.identity(2)
    with pytest.raises(ValueError):
        nf_latent_sampling(enc, v_std, FlowSpec(6, 2, 2, augment=0),
                           TrainConfig(lr0=5e-3, gamma=0.99, batch=16, epochs=1),
                           n=1, rng=Rng(0), draws_per_input=0)


def test_invert_preserves_order_and_validates():
    enc, dec = _toy_pair()
    wset = sample_prior(2, 9, Rng(40))
    ystar = np.array([[0.25]])
    out = invert(dec, ystar, wset)
    assert np.array_equal(out, decode(dec, ystar, wset.samples))

    empty = LatentSampleSet(np.zeros((0, 2)), "prior")
    assert invert(dec, ystar, empty).shape == (0, 2)
    with pytest.raises(ValueError):
        invert(dec, np.array([[np.inf]]), wset)
    with pytest.raises(ValueError):
        invert(dec, np.array([[0.0, 1.0]]), wset)
    bad_w = sample_prior(3, 4, Rng(41))
    with pytest.raises(ValueError):
        invert(dec, ystar, bad_w)
