"""Lorenz convection system with parameter-and-time inputs.

Records pair v = (Pr, Ra, b, t) with the state y(t) = (x, y, z), plus the
n_p preceding states as auxiliary inputs for the flow-map emulator. The
sampling time t lives on the integrator's own grid.
"""

from __future__ import annotations

import numpy as np

from ..emulator import AuxLayout
from ..errors import NumericError
from ..rng import Rng
from .base import Dataset
from .odes import rk4_step

DT = 5e-4
T_FINAL = 4.0
IC = (0.0, 1.0, 0.0)
PR_RANGE = (8.0, 12.0)
RA_RANGE = (26.0, 30.0)
B_RANGE = (8.0 / 3.0 - 1.0, 8.0 / 3.0 + 1.0)
N_LAGS = 10
STATE_NAMES = ("x", "y", "z")


def lorenz_rhs(t, s, pr, ra, b):
    """s has shape (..., 3); pr/ra/b scalars or arrays over leading dims."""
    x, y, z = s[..., 0], s[..., 1], s[..., 2]
    return np.stack([pr * (y - x), x * (ra - z) - y, x * y - b * z], axis=-1)


def _batch_solve(pr, ra, b, n_steps: int, dt: float, capture=None,
                 state0=None, strict: bool = True):
    """March a batch of trajectories; ``capture(step, states)`` sees every
    step including 0. Non-strict mode freezes diverged rows at NaN."""
    pr = np.asarray(pr, dtype=np.float64)
    n = pr.shape[0]
    if state0 is None:
        s = np.tile(np.asarray(IC, dtype=np.float64), (n, 1))
    else:
        s = np.array(state0, dtype=np.float64, copy=True)
    bad = ~np.all(np.isfinite(s), axis=1)
    if capture is not None:
        capture(0, s)
    with np.errstate(all="ignore"):
        for i in range(1, n_steps + 1):
            s = rk4_step(lorenz_rhs, (i - 1) * dt, s, dt, pr, ra, b)
            fresh = ~np.all(np.isfinite(s), axis=1) & ~bad
            if fresh.any():
                if strict:
                    raise NumericError(f"non-finite trajectory at step {i}")
                bad |= fresh
                s[bad] = np.nan
            if capture is not None:
                capture(i, s)
    return s


def lorenz_solve(pr: float, ra: float, b: float, t_end: float = T_FINAL,
                 dt: float = DT) -> np.ndarray:
    """Full trajectory from (0, 1, 0); shape (n_steps + 1, 3)."""
    n_steps = round(t_end / dt)
    traj = np.empty((n_steps + 1, 3))

    def capture(step, s):
        traj[step] = s[0]

    _batch_solve(np.array([pr]), np.array([ra]), np.array([b]), n_steps, dt,
                 capture=capture)
    return traj


class _StepCaptures:
    """Scatter rows of the live state into a buffer at prescribed steps.

    Entries are (step, sim, rec, slot) sorted by step; lookups during the
    sweep are two binary searches plus one fancy-indexed assignment.
    """

    def __init__(self, step, sim, rec, slot, buf):
        order = np.argsort(step, kind="stable")
        self.step = step[order]
        self.sim = sim[order]
        self.rec = rec[order]
        self.slot = slot[order]
        self.buf = buf

    def __call__(self, st, states):
        lo = np.searchsorted(self.step, st, side="left")
        hi = np.searchsorted(self.step, st, side="right")
        if hi > lo:
            self.buf[self.rec[lo:hi], self.slot[lo:hi]] = states[self.sim[lo:hi]]


def generate(n_sims: int, rng: Rng, points_per_sim: int = 30,
             t_end: float = T_FINAL, dt: float = DT,
             n_lags: int = N_LAGS) -> Dataset:
    n_steps = round(t_end / dt)
    if n_steps < n_lags + 1:
        raise ValueError("t_end too short for the requested lag depth")
    pr = rng.uniform(PR_RANGE[0], PR_RANGE[1], n_sims)
    ra = rng.uniform(RA_RANGE[0], RA_RANGE[1], n_sims)
    b = rng.uniform(B_RANGE[0], B_RANGE[1], n_sims)

    # sampled target steps, at least n_lags in so the full lag window exists
    steps = np.empty((n_sims, points_per_sim), dtype=np.int64)
    for i in range(n_sims):
        steps[i] = n_lags + rng.choice(n_steps - n_lags + 1, points_per_sim,
                                       replace=False)

    n_rec = n_sims * points_per_sim
    window = n_lags + 1
    rec_ids = np.arange(n_rec)
    sims = np.repeat(np.arange(n_sims), points_per_sim)
    cap_rec = np.repeat(rec_ids, window)
    cap_sim = np.repeat(sims, window)
    cap_slot = np.tile(np.arange(window), n_rec)
    cap_step = np.repeat(steps.ravel(), window) - (n_lags - cap_slot)

    buf = np.empty((n_rec, window, 3))
    _batch_solve(pr, ra, b, n_steps, dt,
                 capture=_StepCaptures(cap_step, cap_sim, cap_rec, cap_slot, buf))

    v = np.stack([pr[sims], ra[sims], b[sims], steps.ravel() * dt], axis=1)
    aux_names = [f"lag{n_lags - k}_{c}" for k in range(n_lags) for c in STATE_NAMES]
    return Dataset(
        tag="lorenz",
        v=v,
        y=buf[:, -1],
        aux=buf[:, :n_lags].reshape(n_rec, 3 * n_lags),
        v_names=["Pr", "Ra", "b", "t"],
        y_names=list(STATE_NAMES),
        aux_names=aux_names,
        layout=AuxLayout(n_lags=n_lags, state_dim=3),
        scaling=False,
        meta={
            "prior": {"Pr": list(PR_RANGE), "Ra": list(RA_RANGE),
                      "b": list(B_RANGE), "t": [n_lags * dt, n_steps * dt]},
            "dt": dt, "t_end": t_end, "points_per_sim": points_per_sim,
            "ic": list(IC),
        },
    )


def resolve_outputs(vhat, rng: Rng | None = None, dt: float = DT,
                    max_time: float = 2.0 * T_FINAL, **_) -> np.ndarray:
    """Exact state at each row's own (Pr, Ra, b, t): whole steps on the grid
    plus one partial step for the remainder. Rows with t outside [0,
    max_time] come back NaN."""
    vhat = np.atleast_2d(np.asarray(vhat, dtype=np.float64))
    pr, ra, b, t = vhat[:, 0], vhat[:, 1], vhat[:, 2], vhat[:, 3]
    out = np.full((vhat.shape[0], 3), np.nan)
    ok = np.isfinite(t) & (t >= 0.0) & (t <= max_time)
    if not ok.any():
        return out
    pr, ra, b, t = pr[ok], ra[ok], b[ok], t[ok]
    whole = np.floor(t / dt + 1e-12).astype(np.int64)
    rem = t - whole * dt
    n = pr.shape[0]
    buf = np.empty((n, 1, 3))
    cap = _StepCaptures(whole, np.arange(n), np.arange(n), np.zeros(n, np.int64), buf)
    _batch_solve(pr, ra, b, int(whole.max()), dt, capture=cap, strict=False)
    state = buf[:, 0]
    with np.errstate(all="ignore"):
        out[ok] = rk4_step(lorenz_rhs, (t - rem)[:, None], state, rem[:, None],
                           pr, ra, b)
    return out
