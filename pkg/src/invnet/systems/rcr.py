"""Three-element Windkessel (RCR) circuit driven by a pulsatile inflow.

Proximal pressure obeys
    dP_p/dt = R_p dQ_p/dt + Q_p/C - (P_p - Q_p R_p - P_d) / (C R_d)
in CGS units (Barye, ml/s); the dataset reports pressures in mmHg. The
inflow waveform is pluggable: the default is a half-sine systolic ejection
over the first 35% of the cycle with a 400 ml/s peak and zero diastolic
flow, matching the reference waveform qualitatively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericError
from ..rng import Rng
from .base import Dataset
from .odes import rk4_step

T_CYCLE = 1.07
DT = 0.01
N_CYCLES = 10
EXTREMA_CYCLES = 3
P_DISTAL_MMHG = 55.0
BARYE_PER_MMHG = 1333.22
SYSTOLE_FRACTION = 0.35
PEAK_FLOW = 400.0
R_RANGE = (500.0, 1500.0)
C_RANGE = (1e-5, 1e-4)


def pulse_flow(t):
    """Default inflow: (Q_p, dQ_p/dt) at time t (array ok), ml/s."""
    t = np.asarray(t, dtype=np.float64)
    tau = np.mod(t, T_CYCLE)
    t_sys = SYSTOLE_FRACTION * T_CYCLE
    phase = np.pi * tau / t_sys
    in_systole = tau < t_sys
    q = np.where(in_systole, PEAK_FLOW * np.sin(phase), 0.0)
    qdot = np.where(in_systole, PEAK_FLOW * (np.pi / t_sys) * np.cos(phase), 0.0)
    return q, qdot


def _rhs(t, p, rp, rd, c, waveform):
    q, qdot = waveform(t)
    p_d = P_DISTAL_MMHG * BARYE_PER_MMHG
    return rp * qdot + q / c - (p - q * rp - p_d) / (c * rd)


@dataclass
class RcrResult:
    times: np.ndarray
    pressures_mmhg: np.ndarray  # (n_steps + 1, batch)
    p_max: np.ndarray
    p_min: np.ndarray
    mean_last_cycle: np.ndarray


def rcr_solve(rp, rd, c, waveform=pulse_flow, n_cycles: int = N_CYCLES,
              dt: float = DT, allow_divergence: bool = False) -> RcrResult:
    """Integrate P_p from rest over n_cycles; extrema over the final three.

    Batched: rp/rd/c may be arrays of equal shape. With allow_divergence,
    rows that go non-finite freeze to NaN instead of raising (used when
    re-simulating decoded parameters that may fall outside sane ranges).
    """
    rp, rd, c = np.broadcast_arrays(
        np.asarray(rp, dtype=np.float64),
        np.asarray(rd, dtype=np.float64),
        np.asarray(c, dtype=np.float64),
    )
    rp, rd, c = rp.ravel(), rd.ravel(), c.ravel()
    per_cycle = round(T_CYCLE / dt)
    n_steps = n_cycles * per_cycle
    p = np.zeros(rp.shape[0])
    bad = (c <= 0.0) | (rd <= 0.0)
    if bad.any() and not allow_divergence:
        raise NumericError("non-physical RCR parameters (need C > 0, R_d > 0)")
    p[bad] = np.nan
    series = np.empty((n_steps + 1, rp.shape[0]))
    series[0] = p
    with np.errstate(all="ignore"):
        for i in range(n_steps):
            p = rk4_step(_rhs, i * dt, p, dt, rp, rd, c, waveform)
            fresh_bad = ~np.isfinite(p) & ~bad
            if fresh_bad.any():
                if not allow_divergence:
                    raise NumericError(f"non-finite pressure at t={(i + 1) * dt:g}")
                bad |= fresh_bad
                p[bad] = np.nan
            series[i + 1] = p
    series /= BARYE_PER_MMHG
    tail = series[n_steps - EXTREMA_CYCLES * per_cycle :]
    last_cycle = series[n_steps - per_cycle : n_steps]
    return RcrResult(
        times=np.arange(n_steps + 1) * dt,
        pressures_mmhg=series,
        p_max=tail.max(axis=0),
        p_min=tail.min(axis=0),
        mean_last_cycle=last_cycle.mean(axis=0),
    )


def generate(n_sims: int, rng: Rng, waveform=pulse_flow) -> Dataset:
    rp = rng.uniform(R_RANGE[0], R_RANGE[1], n_sims)
    rd = rng.uniform(R_RANGE[0], R_RANGE[1], n_sims)
    c = rng.uniform(C_RANGE[0], C_RANGE[1], n_sims)
    sol = rcr_solve(rp, rd, c, waveform=waveform)
    return Dataset(
        tag="rcr",
        v=np.stack([rp, rd, c], axis=1),
        y=np.stack([sol.p_max, sol.p_min], axis=1),
        v_names=["R_p", "R_d", "C"],
        y_names=["P_max", "P_min"],
        scaling=True,
        meta={
            "prior": {"R_p": list(R_RANGE), "R_d": list(R_RANGE),
                      "C": list(C_RANGE)},
            "units": {"R": "Barye*s/ml", "C": "ml/Barye", "P": "mmHg"},
            "dt": DT, "n_cycles": N_CYCLES,
        },
    )


def resolve_outputs(vhat, rng: Rng | None = None, waveform=pulse_flow,
                    **_) -> np.ndarray:
    """Re-simulated (P_max, P_min) for decoded parameter rows; non-physical
    or diverging rows come back NaN."""
    vhat = np.atleast_2d(np.asarray(vhat, dtype=np.float64))
    sol = rcr_solve(vhat[:, 0], vhat[:, 1], vhat[:, 2], waveform=waveform,
                    allow_divergence=True)
    return np.stack([sol.p_max, sol.p_min], axis=1)
