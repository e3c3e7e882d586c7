"""Dataset container, train/test splitting, and on-disk format.

A dataset is one CSV (header names every column, one record per row) plus a
JSON sidecar carrying the experiment tag, seed, auxiliary layout, priors and
normalization hints. Floats are written with %.17g so files round-trip
bit-exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..emulator import AuxLayout
from ..errors import DataError
from ..rng import Rng

FLOAT_FMT = "%.17g"


@dataclass
class Dataset:
    tag: str
    v: np.ndarray
    y: np.ndarray
    v_names: list
    y_names: list
    aux: np.ndarray | None = None
    aux_names: list = field(default_factory=list)
    layout: AuxLayout | None = None
    log_flags_v: list = field(default_factory=list)
    scaling: bool = True
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.v.ndim != 2 or self.y.ndim != 2 or self.v.shape[0] != self.y.shape[0]:
            raise DataError("v and y must be 2-D with matching row counts")
        if self.aux is not None:
            self.aux = np.asarray(self.aux, dtype=np.float64)
            if self.aux.shape[0] != self.v.shape[0]:
                raise DataError("aux row count mismatch")
        if not self.log_flags_v:
            self.log_flags_v = [False] * self.v.shape[1]
        if len(self.v_names) != self.v.shape[1] or len(self.y_names) != self.y.shape[1]:
            raise DataError("column name counts do not match arrays")
        for arr, what in ((self.v, "v"), (self.y, "y"), (self.aux, "aux")):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise DataError(f"non-finite values in {what}")

    @property
    def n(self) -> int:
        return self.v.shape[0]


def split_indices(n: int, train_frac: float, rng: Rng):
    """Seeded shuffle split; returns (train_idx, test_idx) sorted."""
    if not 0.0 < train_frac <= 1.0:
        raise ValueError("train_frac must lie in (0, 1]")
    perm = rng.permutation(n)
    k = int(math.ceil(train_frac * n))
    return np.sort(perm[:k]), np.sort(perm[k:])


def save_dataset(ds: Dataset, path) -> Path:
    """Write <path>.csv plus <path>.json; returns the CSV path."""
    path = Path(path)
    if path.suffix == ".csv":
        path = path.with_suffix("")
    csv_path = path.with_suffix(".csv")
    cols = [ds.v, ds.y] + ([ds.aux] if ds.aux is not None else [])
    names = list(ds.v_names) + list(ds.y_names) + list(ds.aux_names)
    table = np.concatenate(cols, axis=1)
    np.savetxt(csv_path, table, fmt=FLOAT_FMT, delimiter=",",
               header=",".join(names), comments="")
    sidecar = {
        "tag": ds.tag,
        "seed": ds.seed,
        "n": ds.n,
        "v_names": list(ds.v_names),
        "y_names": list(ds.y_names),
        "aux_names": list(ds.aux_names),
        "log_flags_v": [bool(b) for b in ds.log_flags_v],
        "scaling": bool(ds.scaling),
        "layout": None if ds.layout is None else {
            "n_lags": ds.layout.n_lags,
            "state_dim": ds.layout.state_dim,
            "n_neighbors": ds.layout.n_neighbors,
        },
        "meta": ds.meta,
    }
    path.with_suffix(".json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=1) + "\n")
    return csv_path


def load_dataset(path) -> Dataset:
    path = Path(path)
    if path.suffix == ".csv":
        path = path.with_suffix("")
    csv_path, json_path = path.with_suffix(".csv"), path.with_suffix(".json")
    if not csv_path.exists() or not json_path.exists():
        raise DataError(f"dataset files missing at {path}(.csv/.json)")
    try:
        side = json.loads(json_path.read_text())
        table = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    except (json.JSONDecodeError, ValueError) as exc:
        raise DataError(f"unreadable dataset at {path}: {exc}") from None
    dv, dy = len(side["v_names"]), len(side["y_names"])
    da = len(side["aux_names"])
    if table.shape[1] != dv + dy + da:
        raise DataError("CSV column count disagrees with the sidecar")
    layout = None
    if side["layout"] is not None:
        layout = AuxLayout(**side["layout"])
    return Dataset(
        tag=side["tag"],
        v=table[:, :dv],
        y=table[:, dv : dv + dy],
        aux=table[:, dv + dy :] if da else None,
        v_names=side["v_names"],
        y_names=side["y_names"],
        aux_names=side["aux_names"],
        layout=layout,
        log_flags_v=side["log_flags_v"],
        scaling=side["scaling"],
        seed=side["seed"],
        meta=side["meta"],
    )


def generate_dataset(tag: str, n_sims: int, seed: int, **overrides) -> Dataset:
    """Dispatch to the named system's generator; deterministic given seed."""
    from . import linear, lorenz, rcr, reaction_diffusion, sine

    generators = {
        "linear": linear.generate,
        "sine-nonper": lambda n, rng, **kw: sine.generate(n, rng, periodic=False, **kw),
        "sine-periodic": lambda n, rng, **kw: sine.generate(n, rng, periodic=True, **kw),
        "rcr": rcr.generate,
        "lorenz": lorenz.generate,
        "rd": reaction_diffusion.generate,
    }
    if tag not in generators:
        raise DataError(f"unknown system tag {tag!r}; expected one of "
                        f"{sorted(generators)}")
    ds = generators[tag](n_sims, Rng(seed), **overrides)
    ds.seed = seed
    return ds
