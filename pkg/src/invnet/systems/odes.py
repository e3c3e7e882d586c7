"""Classical Runge-Kutta time stepping shared by the ODE/PDE systems."""

from __future__ import annotations

import numpy as np

from ..errors import NumericError


def rk4_step(rhs, t, y, dt, *args):
    """One classical fourth-order step y(t) -> y(t + dt).

    ``dt`` (and ``t``) may be arrays broadcastable against ``y`` so a batch
    of rows can take individually sized partial steps.
    """
    k1 = rhs(t, y, *args)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1, *args)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2, *args)
    k4 = rhs(t + dt, y + dt * k3, *args)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(rhs, y0, dt: float, n_steps: int, t0: float = 0.0, args=(),
              callback=None):
    """March n_steps of RK4, checking finiteness each step.

    ``callback(step, t, y)`` fires for every step index 0..n_steps, step 0
    being the initial state; y is the live array and must be copied if kept.
    Returns the final state.
    """
    y = np.asarray(y0, dtype=np.float64).copy()
    if callback is not None:
        callback(0, t0, y)
    for i in range(1, n_steps + 1):
        t_prev = t0 + (i - 1) * dt
        y = rk4_step(rhs, t_prev, y, dt, *args)
        if not np.all(np.isfinite(y)):
            raise NumericError(f"non-finite state at step {i} (t={t0 + i * dt:g})")
        if callback is not None:
            callback(i, t0 + i * dt, y)
    return y
