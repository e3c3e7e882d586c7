"""Dense network construction, forward oracles and gradient flow."""

import numpy as np
import pytest

from invnet import autodiff as ad
from invnet.autodiff import Tape, Tensor, backward, fd_grad
from invnet.nets import ACTIVATIONS, DenseNet, DenseNetSpec
from invnet.rng import Rng


def test_layer_dims():
    spec = DenseNetSpec(3, 8, 2, "silu", 5)
    assert spec.layer_dims() == [(3, 8), (8, 8), (8, 5)]
    assert DenseNetSpec(2, 4, 0, "identity", 1).layer_dims() == [(2, 1)]


def test_invalid_specs():
    with pytest.raises(ValueError):
        DenseNetSpec(3, 0, 2, "silu", 1)
    with pytest.raises(ValueError):
        DenseNetSpec(3, 4, 2, "swish", 1)
    with pytest.raises(ValueError):
        DenseNetSpec(0, 4, 2, "silu", 1)


def test_forward_matches_manual_composition():
    rng = Rng(41)
    net = DenseNet(DenseNetSpec(3, 6, 2, "silu", 2), rng)
    x = rng.gaussian((5, 3))
    h = x
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.data + b.data
        if i < len(net.weights) - 1:
            h = h * (1.0 / (1.0 + np.exp(-h)))
    got = net(Tensor(x)).data
    assert np.abs(got - h).max() < 1e-12


def test_identity_activation_is_affine():
    rng = Rng(42)
    net = DenseNet(DenseNetSpec(3, 4, 1, "identity", 2), rng)
    x = rng.gaussian((6, 3))
    w_eff = net.weights[0].data @ net.weights[1].data
    b_eff = net.biases[0].data @ net.weights[1].data + net.biases[1].data
    assert np.abs(net(Tensor(x)).data - (x @ w_eff + b_eff)).max() < 1e-12


def test_xavier_bounds_and_zero_biases():
    rng = Rng(43)
    spec = DenseNetSpec(10, 20, 2, "relu", 4)
    net = DenseNet(spec, rng)
    for w, (fi, fo) in zip(net.weights, spec.layer_dims()):
        limit = np.sqrt(6.0 / (fi + fo))
        assert np.abs(w.data).max() <= limit
        assert np.abs(w.data).max() > 0.5 * limit  # actually random, not zero
    for b in net.biases:
        assert np.all(b.data == 0.0)


def test_zero_last_makes_zero_map():
    rng = Rng(44)
    net = DenseNet(DenseNetSpec(3, 8, 2, "silu", 2), rng, zero_last=True)
    x = rng.gaussian((4, 3))
    assert np.all(net(Tensor(x)).data == 0.0)


def test_construction_is_seed_deterministic():
    w1 = DenseNet(DenseNetSpec(3, 5, 2, "relu", 2), Rng(45)).weights[0].data
    w2 = DenseNet(DenseNetSpec(3, 5, 2, "relu", 2), Rng(45)).weights[0].data
    assert np.array_equal(w1, w2)


@pytest.mark.parametrize("act", ACTIVATIONS)
def test_net_gradients_vs_fd(act):
    rng = Rng(46)
    net = DenseNet(DenseNetSpec(2, 3, 1, act, 2), rng)
    x = rng.gaussian((3, 2)) + 0.3  # keep relu inputs off the kink
    params = net.params()

    def f(*ps):
        return ad.tmean(ad.tsum(ad.square(net(Tensor(x))), axis=1))

    got = [t.data for t in ad.grad(f, params)]
    want = fd_grad(f, params, h=1e-6)
    for g, w in zip(got, want):
        assert np.abs(g - w).max() < 1e-4 * max(1.0, np.abs(w).max())


def test_call_count_increments():
    rng = Rng(47)
    net = DenseNet(DenseNetSpec(2, 3, 1, "silu", 1), rng)
    before = net.call_count
    net(Tensor(np.zeros((1, 2))))
    net(Tensor(np.zeros((1, 2))))
    assert net.call_count == before + 2
