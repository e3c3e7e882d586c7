"""Gradient engine checks against central finite differences."""

import numpy as np
import pytest

from invnet import autodiff as ad
from invnet.autodiff import Tape, Tensor, backward, fd_grad
from invnet.errors import NumericError
from invnet.rng import Rng


def _gradcheck(f, params, rtol=1e-6, h=1e-5):
    got = [t.data for t in ad.grad(f, params)]
    want = fd_grad(f, params, h=h)
    for g, w in zip(got, want):
        scale = max(np.abs(w).max(), 1.0)
        assert np.abs(g - w).max() / scale < rtol, f"max diff {np.abs(g - w).max()}"


UNARY = [
    (ad.exp, (-1.0, 1.0)),
    (ad.log, (0.5, 3.0)),
    (ad.sqrt, (0.5, 3.0)),
    (ad.square, (-2.0, 2.0)),
    (ad.tanh, (-2.0, 2.0)),
    (ad.sigmoid, (-3.0, 3.0)),
    (ad.silu, (-3.0, 3.0)),
    (ad.neg, (-2.0, 2.0)),
]


@pytest.mark.parametrize("op,domain", UNARY, ids=[op.__name__ for op, _ in UNARY])
def test_unary_grads(op, domain):
    rng = Rng(11)
    x = Tensor(rng.uniform(*domain, size=(3, 4)))
    _gradcheck(lambda t: ad.tsum(ad.mul(op(t), 1.7)), [x], rtol=1e-5)


def test_relu_grad_off_kink():
    x = Tensor(np.array([[-1.5, -0.3], [0.4, 2.0]]))
    _gradcheck(lambda t: ad.tsum(ad.relu(t)), [x])


def test_binary_grads_with_broadcasting():
    rng = Rng(12)
    a = Tensor(rng.uniform(0.5, 2.0, size=(3, 4)))
    b = Tensor(rng.uniform(0.5, 2.0, size=(4,)))  # broadcasts over rows
    for op in (ad.add, ad.sub, ad.mul, ad.div):
        _gradcheck(lambda x, y: ad.tsum(op(x, y)), [a, b], rtol=1e-5)


def test_matmul_grad():
    rng = Rng(13)
    a = Tensor(rng.gaussian((3, 4)))
    b = Tensor(rng.gaussian((4, 2)))
    _gradcheck(lambda x, y: ad.tsum(ad.square(ad.matmul(x, y))), [a, b], rtol=1e-5)


def test_sum_mean_axes():
    rng = Rng(14)
    x = Tensor(rng.gaussian((4, 5)))
    _gradcheck(lambda t: ad.tsum(ad.square(ad.tsum(t, axis=0))), [x], rtol=1e-5)
    _gradcheck(lambda t: ad.tsum(ad.square(ad.tmean(t, axis=1))), [x], rtol=1e-5)
    _gradcheck(lambda t: ad.tmean(ad.square(t)), [x], rtol=1e-5)


def test_concat_slice_grads():
    rng = Rng(15)
    a = Tensor(rng.gaussian((3, 2)))
    b = Tensor(rng.gaussian((3, 3)))

    def f(x, y):
        joined = ad.concat([x, y])
        return ad.tsum(ad.square(ad.slice_last(joined, 1, 4)))

    _gradcheck(f, [a, b], rtol=1e-5)


def test_maximum_const_grad():
    x = Tensor(np.array([[-1.0, 0.5], [2.0, -0.2]]))
    _gradcheck(lambda t: ad.tsum(ad.square(ad.maximum_const(t, 0.1))), [x])


def test_composite_expression():
    rng = Rng(16)
    w = Tensor(rng.gaussian((4, 3)))
    x = Tensor(rng.gaussian((2, 4)))

    def f(wt, xt):
        h = ad.silu(ad.matmul(xt, wt))
        return ad.tmean(ad.tsum(ad.square(h), axis=1))

    _gradcheck(f, [w, x], rtol=1e-5)


def test_grad_accumulates_over_reuse():
    x = Tensor(np.array([2.0]))
    with Tape():
        out = ad.tsum(ad.add(ad.mul(x, x), ad.mul(3.0, x)))  # x^2 + 3x
    (g,) = backward(out, [x])
    assert np.allclose(g, [7.0])


def test_backward_after_tape_closes():
    x = Tensor(np.array([1.0, 2.0]))
    with Tape():
        out = ad.tsum(ad.square(x))
    (g,) = backward(out, [x])
    assert np.allclose(g, [2.0, 4.0])


def test_grads_are_writable():
    # the optimizer mutates gradient buffers in place; views would break it
    x = Tensor(np.ones((2, 3)))
    with Tape():
        out = ad.tsum(ad.mul(x, 2.0))
    (g,) = backward(out, [x])
    g += 1.0
    assert np.all(g == 3.0)


def test_unused_parameter_gets_zero_grad():
    x = Tensor(np.array([1.0, 2.0]))
    y = Tensor(np.array([5.0]))
    with Tape():
        out = ad.tsum(ad.square(x))
    gx, gy = backward(out, [x, y])
    assert np.allclose(gx, [2.0, 4.0])
    assert np.all(gy == 0.0)


def test_nonfinite_forward_raises():
    x = Tensor(np.array([-1.0]))
    with Tape():
        with pytest.raises(NumericError):
            ad.log(x)


def test_backward_requires_scalar():
    x = Tensor(np.ones(3))
    with Tape():
        out = ad.square(x)
    with pytest.raises(ValueError):
        backward(out, [x])


def test_ops_outside_tape_are_plain_eval():
    x = Tensor(np.array([1.0, 2.0]))
    out = ad.square(x)
    assert np.allclose(out.data, [1.0, 4.0])
    assert out.node is None
