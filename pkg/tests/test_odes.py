"""Classical RK4 stepper: accuracy order, callbacks, failure reporting."""

import math

import numpy as np
import pytest

from invnet.errors import NumericError
from invnet.systems.odes import integrate, rk4_step


def test_exponential_decay_error_is_fourth_order_small():
    # dv/dt = -v from 1.0 over [0, 1] with dt = 0.01; frozen bound computed
    # from the classical error of RK4 on this problem (3.09e-11)
    got = integrate(lambda t, y: -y, np.array([1.0]), 0.01, 100)
    assert abs(got[0] - math.exp(-1.0)) < 1e-10


def test_observed_convergence_order():
    def err(dt):
        n = round(1.0 / dt)
        got = integrate(lambda t, y: -y, np.array([1.0]), dt, n)
        return abs(got[0] - math.exp(-1.0))

    order = math.log2(err(0.02) / err(0.01))
    assert 3.8 <= order <= 4.2


def test_single_step_exact_for_cubic_rhs():
    # RK4 reproduces polynomial rhs in t up to degree 3 exactly
    dt = 0.37
    got = rk4_step(lambda t, y: np.array([t**3]), 0.0, np.array([0.0]), dt)
    assert abs(got[0] - dt**4 / 4.0) < 1e-15 * dt**4 + 1e-300


def test_step_broadcasts_dt_per_row():
    y = np.array([[1.0], [2.0]])
    dts = np.array([[0.1], [0.2]])
    both = rk4_step(lambda t, y: -y, 0.0, y, dts)
    one = rk4_step(lambda t, y: -y, 0.0, y[:1], 0.1)
    two = rk4_step(lambda t, y: -y, 0.0, y[1:], 0.2)
    assert np.array_equal(both, np.vstack([one, two]))


def test_callback_sees_every_step_including_zero():
    seen = []
    integrate(lambda t, y: -y, np.array([1.0]), 0.5, 4,
              callback=lambda i, t, y: seen.append((i, t, y.copy())))
    assert [s[0] for s in seen] == [0, 1, 2, 3, 4]
    assert np.allclose([s[1] for s in seen], [0.0, 0.5, 1.0, 1.5, 2.0])
    assert seen[0][2][0] == 1.0


def test_blowup_raises_with_step_number():
    with np.errstate(all="ignore"):
        with pytest.raises(NumericError, match="step"):
            integrate(lambda t, y: y**3, np.array([10.0]), 1.0, 50)


def test_final_state_equals_last_callback_state():
    states = []
    out = integrate(lambda t, y: -0.5 * y, np.array([2.0, -1.0]), 0.1, 7,
                    callback=lambda i, t, y: states.append(y.copy()))
    assert np.array_equal(out, states[-1])
