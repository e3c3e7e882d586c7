"""Verification metrics and reporting for inverse estimates."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


def zeta(ystar, yhat) -> float:
    """Relative l2 error ||y* - yhat|| / ||y*||; y* must have nonzero norm."""
    ystar = np.asarray(ystar, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if ystar.shape != yhat.shape:
        raise ValueError("shape mismatch")
    denom = float(np.linalg.norm(ystar))
    if denom == 0.0:
        raise ValueError("zeta is undefined for a zero-norm target")
    if not np.all(np.isfinite(yhat)):
        return float("inf")
    return float(np.linalg.norm(ystar - yhat) / denom)


def zeta_rows(ystar, yhat_rows) -> np.ndarray:
    """Per-row zeta against a single target; non-finite rows map to inf."""
    ystar = np.asarray(ystar, dtype=np.float64).ravel()
    yhat_rows = np.atleast_2d(np.asarray(yhat_rows, dtype=np.float64))
    denom = float(np.linalg.norm(ystar))
    if denom == 0.0:
        raise ValueError("zeta is undefined for a zero-norm target")
    out = np.linalg.norm(yhat_rows - ystar[None, :], axis=1) / denom
    out[~np.all(np.isfinite(yhat_rows), axis=1)] = np.inf
    return out


def fit_line_direction(points) -> np.ndarray:
    """Unit principal direction of a point cloud (least-squares line through
    the centroid), sign-normalized so the first nonzero component is
    positive."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] < 2:
        raise ValueError("need at least 2 points")
    centered = pts - pts.mean(axis=0)
    if not np.any(np.abs(centered) > 0.0):
        raise ValueError("degenerate point cloud (all points identical)")
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    d = vt[0]
    nz = np.nonzero(np.abs(d) > 1e-14)[0]
    if d[nz[0]] < 0:
        d = -d
    return d


@dataclass
class InterrogationReport:
    """Inverse estimates for one target plus per-row verification errors."""

    ystar: np.ndarray
    strategy: str
    provenance: dict
    vhat: np.ndarray
    yhat: np.ndarray
    zetas: np.ndarray
    failed: np.ndarray
    reject_above: float | None = None
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.summary:
            self.summary = self.recompute_summary()

    def recompute_summary(self) -> dict:
        z = self.zetas[np.isfinite(self.zetas)]
        s = {
            "n": int(self.zetas.shape[0]),
            "n_failed": int(self.failed.sum()),
        }
        if z.size:
            qs = np.quantile(z, [0.05, 0.25, 0.5, 0.75, 0.95])
            s.update({
                "zeta_mean": float(z.mean()),
                "zeta_q05": float(qs[0]),
                "zeta_q25": float(qs[1]),
                "zeta_median": float(qs[2]),
                "zeta_q75": float(qs[3]),
                "zeta_q95": float(qs[4]),
                "zeta_max": float(z.max()),
                "frac_below_5pct": float(np.mean(z < 0.05)),
            })
        return s

    def to_json(self) -> str:
        body = {
            "ystar": list(map(float, self.ystar)),
            "strategy": self.strategy,
            "provenance": _plain(self.provenance),
            "reject_above": self.reject_above,
            "summary": self.summary,
        }
        return json.dumps(body, sort_keys=True, indent=1) + "\n"

    def to_csv(self, path) -> Path:
        path = Path(path)
        dv, dy = self.vhat.shape[1], self.yhat.shape[1]
        names = ([f"vhat_{i + 1}" for i in range(dv)]
                 + [f"yhat_{i + 1}" for i in range(dy)] + ["zeta", "failed"])
        table = np.concatenate(
            [self.vhat, self.yhat, self.zetas[:, None],
             self.failed.astype(np.float64)[:, None]], axis=1)
        np.savetxt(path, table, fmt=FLOAT_FMT, delimiter=",",
                   header=",".join(names), comments="")
        return path


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def verify_inversion(resolve_fn, vhat, ystar, strategy: str = "",
                     provenance: dict | None = None,
                     reject_above: float | None = None,
                     rng=None) -> InterrogationReport:
    """Re-solve each decoded row and score it against the target.

    ``resolve_fn(vhat, rng=...)`` returns one output row per input row, NaN
    where the forward solve failed; failed rows get zeta = inf and survive
    only when no rejection threshold is set.
    """
    vhat = np.atleast_2d(np.asarray(vhat, dtype=np.float64))
    ystar = np.asarray(ystar, dtype=np.float64).ravel()
    yhat = np.atleast_2d(np.asarray(resolve_fn(vhat, rng=rng), dtype=np.float64))
    if yhat.shape[0] != vhat.shape[0]:
        raise ValueError("resolver returned a mismatched row count")
    zetas = zeta_rows(ystar, yhat)
    failed = ~np.isfinite(zetas)
    if reject_above is not None:
        keep = np.isfinite(zetas) & (zetas <= reject_above)
        vhat, yhat, zetas, failed = (vhat[keep], yhat[keep], zetas[keep],
                                     failed[keep])
    return InterrogationReport(
        ystar=ystar, strategy=strategy, provenance=provenance or {},
        vhat=vhat, yhat=yhat, zetas=zetas, failed=failed,
        reject_above=reject_above,
    )
