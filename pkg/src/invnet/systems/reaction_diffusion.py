"""Two-species reaction-diffusion on the unit square.

Finite-volume 5-point Laplacian with zero-flux (mirrored ghost cell)
boundaries, cubic two-species reaction, RK4 in time. State arrays are
indexed [species, ix, iy] with cell centers x_i = -1 + (i + 1/2) h on
[-1, 1]^2. Records pair v = (D1, D2, kappa, t, x, y) with the cell's
concentrations, plus the cell and its eight mirrored neighbors at the
previous step as auxiliary inputs.
"""

from __future__ import annotations

import numpy as np

from .. import backend as K
from ..backend.kernels_py import _laplacian
from ..emulator import AuxLayout
from ..errors import NumericError
from ..rng import Rng
from .base import Dataset
from .odes import rk4_step

GRID = 32
DT = 0.005
T_FINAL = 5.0
PARAM_RANGE = (2e-3, 5e-3)
IC_MEAN, IC_STD = 2.0, 1.0
# neighbor order N, S, E, W, NE, NW, SE, SW as (dix, diy); +iy is north
NEIGHBOR_OFFSETS = ((0, 1), (0, -1), (1, 0), (-1, 0),
                    (1, 1), (-1, 1), (1, -1), (-1, -1))
NEIGHBOR_NAMES = ("N", "S", "E", "W", "NE", "NW", "SE", "SW")


def cell_centers(grid: int = GRID) -> np.ndarray:
    h = 2.0 / grid
    return -1.0 + (np.arange(grid) + 0.5) * h


def neighbor_index(i: np.ndarray, di: int, grid: int) -> np.ndarray:
    """Mirrored ghost cells clamp out-of-domain indices to the edge cell."""
    return np.clip(i + di, 0, grid - 1)


def reaction(c: np.ndarray, kappa) -> np.ndarray:
    """Cubic two-species kinetics on state (..., 2, G, G)."""
    c1, c2 = c[..., 0, :, :], c[..., 1, :, :]
    r1 = c1 - c1**3 - np.asarray(kappa)[..., None, None] - c2
    return np.stack([r1, c1 - c2], axis=-3)


def diffusion_rhs(c, d1, d2, inv_h2):
    """Diffusion-only right side (reaction off); used for conservation
    checks and as an independent reference for the fused kernel."""
    c = np.asarray(c, dtype=np.float64)
    single = c.ndim == 3
    cb = c[None] if single else c
    n = cb.shape[0]
    d1b = np.broadcast_to(np.asarray(d1, dtype=np.float64), (n,))[:, None, None]
    d2b = np.broadcast_to(np.asarray(d2, dtype=np.float64), (n,))[:, None, None]
    out = np.stack([d1b * _laplacian(cb[:, 0], inv_h2),
                    d2b * _laplacian(cb[:, 1], inv_h2)], axis=1)
    return out[0] if single else out


def rd_step(c, d1, d2, kappa, dt: float = DT):
    """One RK4 step of the semi-discrete system; accepts (2, G, G) or a
    batch (B, 2, G, G) with per-row parameters."""
    c = np.asarray(c, dtype=np.float64)
    inv_h2 = (c.shape[-1] / 2.0) ** 2
    single = c.ndim == 3
    cb = c[None] if single else c
    n = cb.shape[0]
    d1b = np.broadcast_to(np.asarray(d1, dtype=np.float64), (n,))
    d2b = np.broadcast_to(np.asarray(d2, dtype=np.float64), (n,))
    kb = np.broadcast_to(np.asarray(kappa, dtype=np.float64), (n,))
    out = rk4_step(lambda t, y: K.rd_rhs(y, d1b, d2b, kb, inv_h2), 0.0, cb, dt)
    return out[0] if single else out


def solve(d1, d2, kappa, c0, n_steps: int, dt: float = DT, capture=None,
          strict: bool = True):
    """March a batch (B, 2, G, G); capture(step, states) sees step 0 too."""
    c = np.array(c0, dtype=np.float64, copy=True)
    if c.ndim == 3:
        c = c[None]
    n, g = c.shape[0], c.shape[-1]
    inv_h2 = (g / 2.0) ** 2
    d1b = np.broadcast_to(np.asarray(d1, dtype=np.float64), (n,)).copy()
    d2b = np.broadcast_to(np.asarray(d2, dtype=np.float64), (n,)).copy()
    kb = np.broadcast_to(np.asarray(kappa, dtype=np.float64), (n,)).copy()
    bad = ~np.all(np.isfinite(c.reshape(n, -1)), axis=1)
    if capture is not None:
        capture(0, c)
    rhs = lambda t, y: K.rd_rhs(y, d1b, d2b, kb, inv_h2)
    with np.errstate(all="ignore"):
        for i in range(1, n_steps + 1):
            c = rk4_step(rhs, (i - 1) * dt, c, dt)
            fresh = ~np.all(np.isfinite(c.reshape(n, -1)), axis=1) & ~bad
            if fresh.any():
                if strict:
                    raise NumericError(f"non-finite concentration at step {i}")
                bad |= fresh
                c[bad] = np.nan
            if capture is not None:
                capture(i, c)
    return c


def initial_condition(rng: Rng, grid: int = GRID, n: int = 1) -> np.ndarray:
    """i.i.d. N(2, 1) concentrations per cell and species."""
    return IC_MEAN + IC_STD * rng.gaussian((n, 2, grid, grid))


def generate(n_sims: int, rng: Rng, grid: int = GRID, cells_per_sim: int = 10,
             times_per_sim: int = 5, t_end: float = T_FINAL, dt: float = DT,
             chunk: int = 128) -> Dataset:
    n_steps = round(t_end / dt)
    p_rng = rng.substream(0)
    s_rng = rng.substream(1)
    d1 = p_rng.uniform(PARAM_RANGE[0], PARAM_RANGE[1], n_sims)
    d2 = p_rng.uniform(PARAM_RANGE[0], PARAM_RANGE[1], n_sims)
    kappa = p_rng.uniform(PARAM_RANGE[0], PARAM_RANGE[1], n_sims)

    steps = np.empty((n_sims, times_per_sim), dtype=np.int64)
    cells = np.empty((n_sims, cells_per_sim), dtype=np.int64)
    for i in range(n_sims):
        steps[i] = 1 + s_rng.choice(n_steps, times_per_sim, replace=False)
        cells[i] = s_rng.choice(grid * grid, cells_per_sim, replace=False)

    rec_per_sim = times_per_sim * cells_per_sim
    n_rec = n_sims * rec_per_sim
    buf = np.empty((n_rec, 10, 2))  # slots 0..8: cell+neighbors at t-dt; 9: y
    centers = cell_centers(grid)

    # per-record cell indices and their mirrored neighbor indices
    rec_cells = np.repeat(cells, times_per_sim, axis=1).reshape(n_rec)
    rec_steps = np.tile(steps, (1, cells_per_sim)).reshape(n_rec)
    ix, iy = rec_cells // grid, rec_cells % grid
    slot_ix = np.empty((n_rec, 10), dtype=np.int64)
    slot_iy = np.empty((n_rec, 10), dtype=np.int64)
    slot_ix[:, 0], slot_iy[:, 0] = ix, iy
    for j, (dx, dy) in enumerate(NEIGHBOR_OFFSETS, start=1):
        slot_ix[:, j] = neighbor_index(ix, dx, grid)
        slot_iy[:, j] = neighbor_index(iy, dy, grid)
    slot_ix[:, 9], slot_iy[:, 9] = ix, iy
    slot_step = np.concatenate(
        [np.broadcast_to(rec_steps[:, None] - 1, (n_rec, 9)),
         rec_steps[:, None]], axis=1)

    for lo in range(0, n_sims, chunk):
        hi = min(lo + chunk, n_sims)
        ics = np.concatenate(
            [initial_condition(rng.substream(2 + i), grid) for i in range(lo, hi)])
        rec_lo, rec_hi = lo * rec_per_sim, hi * rec_per_sim
        sim_of = np.repeat(np.arange(hi - lo), rec_per_sim * 10)
        flat_rec = np.repeat(np.arange(rec_lo, rec_hi), 10)
        flat_slot = np.tile(np.arange(10), rec_hi - rec_lo)
        flat_step = slot_step[rec_lo:rec_hi].ravel()
        flat_ix = slot_ix[rec_lo:rec_hi].ravel()
        flat_iy = slot_iy[rec_lo:rec_hi].ravel()
        order = np.argsort(flat_step, kind="stable")
        sim_of, flat_rec, flat_slot, flat_step, flat_ix, flat_iy = (
            a[order] for a in (sim_of, flat_rec, flat_slot, flat_step,
                               flat_ix, flat_iy))

        def capture(st, states):
            a = np.searchsorted(flat_step, st, side="left")
            b = np.searchsorted(flat_step, st, side="right")
            if b > a:
                buf[flat_rec[a:b], flat_slot[a:b]] = states[
                    sim_of[a:b], :, flat_ix[a:b], flat_iy[a:b]]

        solve(d1[lo:hi], d2[lo:hi], kappa[lo:hi], ics, n_steps, dt,
              capture=capture)

    sims = np.repeat(np.arange(n_sims), rec_per_sim)
    v = np.stack([d1[sims], d2[sims], kappa[sims], rec_steps * dt,
                  centers[ix], centers[iy]], axis=1)
    aux_names = ["lag1_c1", "lag1_c2"] + [
        f"nbr_{nm}_c{s}" for nm in NEIGHBOR_NAMES for s in (1, 2)]
    return Dataset(
        tag="rd",
        v=v,
        y=buf[:, 9],
        aux=buf[:, :9].reshape(n_rec, 18),
        v_names=["D1", "D2", "kappa", "t", "x", "y"],
        y_names=["c1", "c2"],
        aux_names=aux_names,
        layout=AuxLayout(n_lags=1, state_dim=2, n_neighbors=8),
        log_flags_v=[True, True, True, False, False, False],
        scaling=False,
        meta={
            "prior": {"D1": list(PARAM_RANGE), "D2": list(PARAM_RANGE),
                      "kappa": list(PARAM_RANGE), "t": [dt, n_steps * dt]},
            "grid": grid, "dt": dt, "t_end": t_end,
            "cells_per_sim": cells_per_sim, "times_per_sim": times_per_sim,
            "ic": {"mean": IC_MEAN, "std": IC_STD},
        },
    )


def resolve_outputs(vhat, rng: Rng | None = None, grid: int = GRID,
                    dt: float = DT, max_time: float = 2.0 * T_FINAL,
                    **_) -> np.ndarray:
    """Forward-simulate decoded rows (D1, D2, kappa, t, x, y) from fresh
    random initial conditions and read the concentrations at the row's
    nearest cell and time. Out-of-range rows come back NaN."""
    if rng is None:
        raise ValueError("resolve_outputs for this system needs an rng for "
                         "fresh initial conditions")
    vhat = np.atleast_2d(np.asarray(vhat, dtype=np.float64))
    n = vhat.shape[0]
    out = np.full((n, 2), np.nan)
    t = vhat[:, 3]
    ok = (np.all(np.isfinite(vhat), axis=1) & (t >= 0.0) & (t <= max_time)
          & (vhat[:, 0] > 0.0) & (vhat[:, 1] > 0.0))
    if not ok.any():
        return out
    rows = np.nonzero(ok)[0]
    d1, d2, kappa = vhat[rows, 0], vhat[rows, 1], vhat[rows, 2]
    whole = np.floor(t[rows] / dt + 1e-12).astype(np.int64)
    rem = t[rows] - whole * dt
    h = 2.0 / grid
    ix = np.clip(np.round((vhat[rows, 4] + 1.0) / h - 0.5), 0, grid - 1).astype(np.int64)
    iy = np.clip(np.round((vhat[rows, 5] + 1.0) / h - 0.5), 0, grid - 1).astype(np.int64)
    ics = np.concatenate(
        [initial_condition(rng.substream(int(r)), grid) for r in rows])
    kept = np.full((rows.size, 2, grid, grid), np.nan)

    def capture(st, states):
        hit = whole == st
        if hit.any():
            kept[hit] = states[hit]

    solve(d1, d2, kappa, ics, int(whole.max()), dt, capture=capture,
          strict=False)
    inv_h2 = (grid / 2.0) ** 2
    with np.errstate(all="ignore"):
        final = rk4_step(lambda tt, y: K.rd_rhs(y, d1, d2, kappa, inv_h2),
                         0.0, kept, rem[:, None, None, None])
    out[rows] = final[np.arange(rows.size), :, ix, iy]
    return out
