"""End-to-end experiment stages behind the CLI.

Every stage is a pure function of (config, seed, input files): rerunning a
stage with the same inputs produces byte-identical artifacts. Random streams
are carved out of the experiment seed per stage, so retraining one component
never shifts another component's draws.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .emulator import (AuxLayout, EmulatorDataset, EmulatorModel, EmulatorSpec,
                       emulate, eval_emulator, rollout, train_emulator)
from .errors import ConfigError, DataError
from .flows import FlowSpec, sample as flow_sample, train_flow
from .metrics import FLOAT_FMT, InterrogationReport, verify_inversion
from .optim import TrainConfig
from .rng import Rng
from .sampling import (LatentSampleSet, hd_sampling, invert as decode_latents,
                       nf_latent_sampling, pc_sampling, sample_prior)
from .scaling import NormalizationStats
from .serialize import ModelBundle, load_model, save_model
from .systems import generate_dataset, load_dataset, resolver, save_dataset, split_indices
from .systems import lorenz as lorenz_mod
from .systems import reaction_diffusion as rd_mod
from .systems.odes import rk4_step
from .vae import PenaltyConfig, VaeDataset, VaeSpec, train_vae_decoder

# per-stage random substreams off the experiment seed
STREAM_SPLIT = 10
STREAM_EMULATOR = 100
STREAM_FLOW = 200
STREAM_VAE = 300
STREAM_SAMPLING = 500
STREAM_VERIFY = 600
STREAM_EVAL = 700


def artifact(out_dir, tag: str, name: str) -> Path:
    return Path(out_dir) / f"{tag}-{name}"


def _strategy_slug(strategy: str) -> str:
    return strategy.replace("+", "-")


def _write_json(path: Path, body: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(body, sort_keys=True, indent=1) + "\n")
    return path


def _write_table(path: Path, names, columns) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    table = np.column_stack([np.asarray(c, dtype=np.float64) for c in columns])
    np.savetxt(path, table, fmt=FLOAT_FMT, delimiter=",",
               header=",".join(names), comments="")
    return path


def _read_table(path: Path):
    if not path.exists():
        raise DataError(f"expected artifact not found: {path}")
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return names, data


def _config_snapshot(cfg) -> dict:
    return json.loads(cfgmod.to_json(cfg))


# ---------------------------------------------------------------- generate

_GENERATE_KEYS = {
    "lorenz": ("points_per_sim",),
    "rd": ("grid", "cells_per_sim", "times_per_sim"),
}


def run_generate(cfg, out_dir) -> Path:
    overrides = {k: cfg.data[k] for k in _GENERATE_KEYS.get(cfg.tag, ())}
    ds = generate_dataset(cfg.tag, cfg.data["n_sims"], cfg.seed, **overrides)
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    path = save_dataset(ds, artifact(out_dir, cfg.tag, "data"))
    return path


def load_experiment_dataset(cfg, out_dir):
    path = artifact(out_dir, cfg.tag, "data.csv")
    if not path.exists():
        raise DataError(f"dataset not found at {path}; run generate-data first")
    return load_dataset(path)


def train_test_split(cfg, n: int):
    return split_indices(n, cfg.data["train_frac"],
                         Rng(cfg.seed).substream(STREAM_SPLIT))


# ------------------------------------------------------------------ train

def _train_cfg(section: dict) -> TrainConfig:
    return TrainConfig(lr0=section["lr0"], gamma=section["gamma"],
                       batch=section["batch"], epochs=section["epochs"],
                       weight_decay=section["weight_decay"])


def _fit_input_stats(ds, train_idx) -> NormalizationStats:
    if ds.scaling:
        return NormalizationStats.fit(ds.v[train_idx], log_flags=ds.log_flags_v)
    return NormalizationStats.identity(ds.v.shape[1], log_flags=ds.log_flags_v)


def _fit_output_stats(ds, train_idx) -> NormalizationStats:
    if ds.scaling:
        return NormalizationStats.fit(ds.y[train_idx])
    return NormalizationStats.identity(ds.y.shape[1])


def _history_csv(path: Path, history: list) -> Path | None:
    if not history:
        return None
    keys = sorted(history[0].keys())
    cols = [np.arange(len(history))] + [[h[k] for h in history] for k in keys]
    return _write_table(path, ["epoch"] + keys, cols)


def _build_vae_dataset(ds, emulator_model, stats_v, stats_y, lambda_r) -> VaeDataset:
    v_std = stats_v.standardize(ds.v)
    y_std = stats_y.standardize(ds.y)
    aux_std = None
    lr_target_std = None
    if lambda_r > 0:
        if emulator_model.mode == "residual":
            layout = emulator_model.layout
            aux_std = emulator_model.stats_aux.standardize(ds.aux)
            delta = ds.y - ds.aux[:, layout.last_lag]
            lr_target_std = delta / emulator_model.stats_out.std
        else:
            lr_target_std = emulator_model.stats_out.standardize(ds.y)
    return VaeDataset(v_std=v_std, y_std=y_std, aux_std=aux_std,
                      lr_target_std=lr_target_std)


def run_train(cfg, out_dir, component: str = "all") -> ModelBundle:
    wanted = {"all": ("emulator", "flow", "vae"),
              "emulator": ("emulator",), "flow": ("flow",), "vae": ("vae",)}
    if component not in wanted:
        raise ConfigError(f"unknown component {component!r}; "
                          "choose emulator, flow, vae or all")
    ds = load_experiment_dataset(cfg, out_dir)
    train_idx, _ = train_test_split(cfg, ds.n)
    model_path = artifact(out_dir, cfg.tag, "model.bin")
    if model_path.exists() and component != "all":
        bundle = load_model(model_path, expect_tag=cfg.tag)
    else:
        bundle = ModelBundle(tag=cfg.tag)
    bundle.meta = {"config": _config_snapshot(cfg), "seed": cfg.seed}
    seed_rng = Rng(cfg.seed)

    if "emulator" in wanted[component]:
        spec = EmulatorSpec(mode=cfg.emulator["mode"], width=cfg.emulator["width"],
                            depth=cfg.emulator["depth"],
                            activation=cfg.emulator["activation"])
        data = EmulatorDataset(ds.v, ds.y, aux=ds.aux, layout=ds.layout,
                               log_flags_v=ds.log_flags_v, scaling=ds.scaling)
        res = train_emulator(data, spec, _train_cfg(cfg.emulator),
                             seed_rng.substream(STREAM_EMULATOR),
                             train_idx=train_idx)
        bundle.emulator = res.model
        _history_csv(artifact(out_dir, cfg.tag, "history-emulator.csv"), res.history)

    if "flow" in wanted[component]:
        stats_y = _fit_output_stats(ds, train_idx)
        spec = FlowSpec(width=cfg.flow["width"], depth=cfg.flow["depth"],
                        couplings=cfg.flow["couplings"],
                        batchnorm=cfg.flow["batchnorm"])
        res = train_flow(ds.y[train_idx], spec, _train_cfg(cfg.flow),
                         seed_rng.substream(STREAM_FLOW), stats=stats_y)
        bundle.flow = res.flow
        _history_csv(artifact(out_dir, cfg.tag, "history-flow.csv"), res.history)

    if "vae" in wanted[component]:
        lam_r = cfg.vae["lambda_r"]
        if lam_r > 0 and bundle.emulator is None:
            raise DataError("the consistency penalty needs a trained emulator; "
                            "run train --component emulator first")
        stats_v = bundle.emulator.stats_v if bundle.emulator is not None \
            else _fit_input_stats(ds, train_idx)
        stats_y = _fit_output_stats(ds, train_idx)
        data = _build_vae_dataset(ds, bundle.emulator, stats_v, stats_y, lam_r)
        spec = VaeSpec(enc_width=cfg.vae["enc_width"], enc_depth=cfg.vae["enc_depth"],
                       enc_activation=cfg.vae["enc_activation"],
                       dec_width=cfg.vae["dec_width"], dec_depth=cfg.vae["dec_depth"],
                       dec_activation=cfg.vae["dec_activation"],
                       latent_dim=cfg.vae["latent_dim"])
        pens = PenaltyConfig(lambda_v=cfg.vae["lambda_v"],
                             lambda_d=cfg.vae["lambda_d"], lambda_r=lam_r)
        res = train_vae_decoder(data, bundle.emulator, spec, pens,
                                _train_cfg(cfg.vae),
                                seed_rng.substream(STREAM_VAE),
                                stats_v=stats_v, stats_y=stats_y)
        bundle.encoder = res.encoder
        bundle.decoder = res.decoder
        bundle.meta["collapse_epoch"] = res.collapse_epoch
        _history_csv(artifact(out_dir, cfg.tag, "history-vae.csv"), res.history)

    save_model(bundle, model_path)
    return bundle


def load_bundle(cfg, out_dir) -> ModelBundle:
    path = artifact(out_dir, cfg.tag, "model.bin")
    if not path.exists():
        raise DataError(f"model not found at {path}; run train first")
    return load_model(path, expect_tag=cfg.tag)


# --------------------------------------------------------- sample outputs

def run_sample_outputs(cfg, out_dir, n: int | None = None) -> Path:
    bundle = load_bundle(cfg, out_dir)
    if bundle.flow is None:
        raise DataError("no output-density flow in the model bundle; "
                        "run train --component flow first")
    n = cfg.sampling["n"] if n is None else n
    draws = flow_sample(bundle.flow, n, Rng(cfg.seed).substream(STREAM_SAMPLING))
    names = [f"y_{i + 1}" for i in range(draws.shape[1])]
    path = _write_table(artifact(out_dir, cfg.tag, "samples.csv"),
                        names, list(draws.T))
    _write_json(artifact(out_dir, cfg.tag, "samples.json"),
                {"tag": cfg.tag, "n": int(draws.shape[0]), "seed": cfg.seed})
    return path


# ------------------------------------------------------------------ invert

def _latent_flow_pieces(cfg):
    lf = cfg.latent_flow
    return (FlowSpec(width=lf["width"], depth=lf["depth"],
                     couplings=lf["couplings"], batchnorm=lf["batchnorm"]),
            _train_cfg(lf))


def interrogate(cfg, bundle: ModelBundle, ystar, rng: Rng, ds=None):
    """Draw latents per the configured strategy and decode input estimates.

    Returns (vhat, latent sample set, trained latent flow or None).
    """
    if bundle.decoder is None or bundle.encoder is None:
        raise DataError("no trained encoder/decoder in the model bundle; "
                        "run train --component vae first")
    strategy = cfg.sampling["strategy"]
    n = cfg.sampling["n"]
    dw = bundle.decoder.dim_w
    latent_flow = None

    if strategy == "prior":
        wset = sample_prior(dw, n, rng.substream(0))
        vhat = decode_latents(bundle.decoder, ystar, wset)
        return vhat, wset, None

    if strategy == "pc":
        w0 = sample_prior(dw, n, rng.substream(0))
        vhat, wset = pc_sampling(bundle.decoder, bundle.encoder, ystar, w0,
                                 cfg.sampling["R"])
        return vhat, wset, None

    if ds is None:
        raise DataError(f"strategy {strategy!r} conditions on the training "
                        "inputs; dataset is required")
    train_idx, _ = train_test_split(cfg, ds.n)
    v_std = bundle.decoder.stats_v.standardize(ds.v[train_idx])

    if strategy == "hd":
        try:
            wset = hd_sampling(bundle.encoder, v_std, cfg.sampling["S"],
                               cfg.sampling["Q"], n, rng.substream(1))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        vhat = decode_latents(bundle.decoder, ystar, wset)
        return vhat, wset, None

    if strategy in ("nf", "nf+pc"):
        if bundle.latent_flow is not None:
            w = flow_sample(bundle.latent_flow, n, rng.substream(2))
            wset = LatentSampleSet(w, "nf", {"n": n, "reused": True})
            latent_flow = bundle.latent_flow
        else:
            spec, tcfg = _latent_flow_pieces(cfg)
            latent_flow, wset = nf_latent_sampling(
                bundle.encoder, v_std, spec, tcfg, n, rng.substream(2),
                draws_per_input=cfg.sampling["draws_per_input"])
        if strategy == "nf+pc":
            vhat, wset = pc_sampling(bundle.decoder, bundle.encoder, ystar,
                                     wset, cfg.sampling["R"])
        else:
            vhat = decode_latents(bundle.decoder, ystar, wset)
        return vhat, wset, latent_flow

    raise ConfigError(f"unknown sampling strategy {strategy!r}")


def run_invert(cfg, out_dir, ystar) -> Path:
    ystar = np.asarray(ystar, dtype=np.float64).ravel()
    bundle = load_bundle(cfg, out_dir)
    strategy = cfg.sampling["strategy"]
    ds = None
    if strategy in ("hd", "nf", "nf+pc"):
        ds = load_experiment_dataset(cfg, out_dir)
    rng = Rng(cfg.seed).substream(STREAM_SAMPLING)
    vhat, wset, _ = interrogate(cfg, bundle, ystar, rng, ds=ds)
    slug = _strategy_slug(strategy)
    names = [f"w_{i + 1}" for i in range(wset.samples.shape[1])] \
        + [f"vhat_{i + 1}" for i in range(vhat.shape[1])]
    path = _write_table(artifact(out_dir, cfg.tag, f"invert-{slug}.csv"),
                        names, list(wset.samples.T) + list(vhat.T))
    _write_json(artifact(out_dir, cfg.tag, f"invert-{slug}.json"), {
        "tag": cfg.tag, "strategy": strategy, "seed": cfg.seed,
        "ystar": [float(v) for v in ystar],
        "n_rows": int(vhat.shape[0]),
        "provenance": _jsonable(wset.provenance),
    })
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


# ------------------------------------------------------------------ verify

def _lorenz_emulated_rows(model: EmulatorModel, vhat, dt=lorenz_mod.DT,
                          max_time: float = 8.0) -> np.ndarray:
    """Re-solve decoded (Pr, Ra, b, t) rows with the trained flow map.

    The first n_lags states come from the exact integrator (the flow map
    needs a full lag window to start); t snaps to the nearest step.
    """
    n_lags = model.layout.n_lags
    vhat = np.atleast_2d(np.asarray(vhat, dtype=np.float64))
    out = np.full((vhat.shape[0], 3), np.nan)
    ic = np.asarray(lorenz_mod.IC, dtype=np.float64)
    for i, row in enumerate(vhat):
        if not np.all(np.isfinite(row)) or not 0.0 <= row[3] <= max_time:
            continue
        pr, ra, b, t = row
        n_total = int(round(t / dt))
        state = ic.copy()
        if n_total < n_lags:
            for k in range(n_total):
                state = rk4_step(lorenz_mod.lorenz_rhs, k * dt, state, dt, pr, ra, b)
            out[i] = state
            continue
        warm = np.empty((n_lags, 3))
        warm[0] = state
        for k in range(1, n_lags):
            state = rk4_step(lorenz_mod.lorenz_rhs, (k - 1) * dt, state, dt, pr, ra, b)
            warm[k] = state
        steps = n_total - n_lags + 1
        times = (np.arange(steps) + n_lags) * dt
        params = np.column_stack([np.full(steps, pr), np.full(steps, ra),
                                  np.full(steps, b), times])
        res = rollout(model, warm, params, steps)
        if not res.flagged:
            out[i] = res.trajectory[-1]
    return out


def _rd_neighbor_tables(grid: int):
    ix = np.repeat(np.arange(grid), grid)
    iy = np.tile(np.arange(grid), grid)
    slots_x = [ix]
    slots_y = [iy]
    for dix, diy in rd_mod.NEIGHBOR_OFFSETS:
        slots_x.append(np.clip(ix + dix, 0, grid - 1))
        slots_y.append(np.clip(iy + diy, 0, grid - 1))
    return ix, iy, np.stack(slots_x, axis=1), np.stack(slots_y, axis=1)


def emulated_field_step(model: EmulatorModel, c: np.ndarray, params_row,
                        t_next: float, tables) -> np.ndarray:
    """Advance a full concentration field one step with the cellwise emulator."""
    ix, iy, sx, sy = tables
    grid = c.shape[-1]
    aux = c[:, sx, sy].transpose(1, 2, 0).reshape(grid * grid, -1)
    centers = rd_mod.cell_centers(grid)
    n_cells = grid * grid
    v = np.column_stack([
        np.full(n_cells, params_row[0]), np.full(n_cells, params_row[1]),
        np.full(n_cells, params_row[2]), np.full(n_cells, t_next),
        centers[ix], centers[iy],
    ])
    rows = emulate(model, v, aux)
    return rows.reshape(grid, grid, 2).transpose(2, 0, 1)


def _rd_emulated_rows(model: EmulatorModel, vhat, rng: Rng, grid: int,
                      dt=rd_mod.DT, max_time: float = 10.0) -> np.ndarray:
    vhat = np.atleast_2d(np.asarray(vhat, dtype=np.float64))
    out = np.full((vhat.shape[0], 2), np.nan)
    tables = _rd_neighbor_tables(grid)
    h = 2.0 / grid
    for i, row in enumerate(vhat):
        if not np.all(np.isfinite(row)):
            continue
        d1, d2, kappa, t, x, y = row
        if not (0.0 <= t <= max_time) or d1 <= 0 or d2 <= 0:
            continue
        n_total = int(round(t / dt))
        c = rd_mod.initial_condition(rng.substream(int(i)), grid, 1)[0]
        ok = True
        for step in range(n_total):
            c = emulated_field_step(model, c, (d1, d2, kappa),
                                    (step + 1) * dt, tables)
            if not np.all(np.isfinite(c)):
                ok = False
                break
        if not ok:
            continue
        cx = int(np.clip(np.round((x + 1.0) / h - 0.5), 0, grid - 1))
        cy = int(np.clip(np.round((y + 1.0) / h - 0.5), 0, grid - 1))
        out[i] = c[:, cx, cy]
    return out


def make_resolver(cfg, oracle: str, bundle: ModelBundle | None = None):
    """Row-wise forward re-solve function for verification.

    oracle "exact" re-runs the reference solver; "emulator" re-runs the
    trained surrogate (flow-map systems roll it out from exact seed states).
    """
    tag = cfg.tag
    if oracle == "exact":
        base = resolver(tag)
        if tag == "rd":
            grid = cfg.data["grid"]
            return lambda vhat, rng=None: base(vhat, rng=rng, grid=grid)
        return base
    if oracle != "emulator":
        raise ConfigError(f"unknown oracle {oracle!r}; choose exact or emulator")
    if bundle is None or bundle.emulator is None:
        raise DataError("emulator oracle needs a trained emulator in the bundle")
    model = bundle.emulator
    if model.mode == "direct":
        return lambda vhat, rng=None: emulate(model, vhat)
    if tag == "lorenz":
        return lambda vhat, rng=None: _lorenz_emulated_rows(model, vhat)
    if tag == "rd":
        grid = cfg.data["grid"]
        return lambda vhat, rng=None: _rd_emulated_rows(model, vhat, rng, grid)
    raise ConfigError(f"emulator oracle is not available for tag {tag!r}")


def run_verify(cfg, out_dir, oracle: str = "exact",
               reject_above: float | None = None,
               strategy: str | None = None) -> InterrogationReport:
    strategy = cfg.sampling["strategy"] if strategy is None else strategy
    slug = _strategy_slug(strategy)
    csv_path = artifact(out_dir, cfg.tag, f"invert-{slug}.csv")
    json_path = artifact(out_dir, cfg.tag, f"invert-{slug}.json")
    if not json_path.exists():
        raise DataError(f"no inversion artifact at {json_path}; run invert first")
    meta = json.loads(json_path.read_text())
    names, data = _read_table(csv_path)
    vcols = [i for i, nm in enumerate(names) if nm.startswith("vhat_")]
    if not vcols:
        raise DataError(f"no vhat_* columns in {csv_path}")
    vhat = data[:, vcols]
    ystar = np.asarray(meta["ystar"], dtype=np.float64)
    bundle = load_bundle(cfg, out_dir) if oracle == "emulator" else None
    resolve = make_resolver(cfg, oracle, bundle)
    report = verify_inversion(
        resolve, vhat, ystar, strategy=strategy,
        provenance={"oracle": oracle, "invert": meta.get("provenance", {})},
        reject_above=reject_above,
        rng=Rng(cfg.seed).substream(STREAM_VERIFY))
    report.to_csv(artifact(out_dir, cfg.tag, f"verify-{slug}.csv"))
    body = json.loads(report.to_json())
    body["tag"] = cfg.tag
    body["oracle"] = oracle
    _write_json(artifact(out_dir, cfg.tag, f"verify-{slug}.json"), body)
    return report


# ----------------------------------------------------------- emulator eval

def run_eval_emulator(cfg, out_dir) -> dict:
    ds = load_experiment_dataset(cfg, out_dir)
    bundle = load_bundle(cfg, out_dir)
    if bundle.emulator is None:
        raise DataError("no trained emulator in the model bundle")
    model = bundle.emulator
    train_idx, test_idx = train_test_split(cfg, ds.n)
    idx = test_idx if test_idx.size else train_idx
    aux = ds.aux[idx] if ds.aux is not None else None
    result = {"tag": cfg.tag,
              "one_step": eval_emulator(model, ds.v[idx], ds.y[idx], aux),
              "split": "test" if test_idx.size else "train"}

    if model.mode == "residual":
        rng = Rng(cfg.seed).substream(STREAM_EVAL)
        if cfg.tag == "lorenz":
            pr = rng.uniform(*lorenz_mod.PR_RANGE)
            ra = rng.uniform(*lorenz_mod.RA_RANGE)
            b = rng.uniform(*lorenz_mod.B_RANGE)
            exact = lorenz_mod.lorenz_solve(pr, ra, b, lorenz_mod.T_FINAL,
                                            lorenz_mod.DT)
            n_lags = model.layout.n_lags
            steps = exact.shape[0] - n_lags
            times = (np.arange(steps) + n_lags) * lorenz_mod.DT
            params = np.column_stack([np.full(steps, pr), np.full(steps, ra),
                                      np.full(steps, b), times])
            res = rollout(model, exact[:n_lags], params, steps)
            got = res.trajectory[n_lags:]
            ref = exact[n_lags : n_lags + got.shape[0]]
            rel = np.linalg.norm(got - ref, axis=1) \
                / np.maximum(np.linalg.norm(ref, axis=1), 1e-12)
            _write_table(artifact(out_dir, cfg.tag, "rollout-curve.csv"),
                         ["t", "rel_err"], [times[: rel.size], rel])
            result["rollout"] = {
                "params": [float(pr), float(ra), float(b)],
                "flagged": bool(res.flagged), "steps_done": int(res.steps_done),
                "final_rel_err": float(rel[-1]) if rel.size else float("nan"),
            }
        elif cfg.tag == "rd":
            grid = cfg.data["grid"]
            lo, hi = rd_mod.PARAM_RANGE
            d1, d2, kappa = (rng.uniform(lo, hi) for _ in range(3))
            c_exact = rd_mod.initial_condition(rng.substream(1), grid, 1)[0]
            c_emul = c_exact.copy()
            tables = _rd_neighbor_tables(grid)
            n_steps = int(round(rd_mod.T_FINAL / rd_mod.DT))
            rels = np.empty(n_steps)
            for step in range(n_steps):
                c_exact = rd_mod.rd_step(c_exact, d1, d2, kappa, rd_mod.DT)
                c_emul = emulated_field_step(model, c_emul, (d1, d2, kappa),
                                             (step + 1) * rd_mod.DT, tables)
                rels[step] = (np.linalg.norm(c_emul - c_exact)
                              / max(np.linalg.norm(c_exact), 1e-12))
                if not np.all(np.isfinite(c_emul)):
                    rels = rels[: step + 1]
                    break
            times = (np.arange(rels.size) + 1) * rd_mod.DT
            _write_table(artifact(out_dir, cfg.tag, "rollout-curve.csv"),
                         ["t", "rel_err"], [times, rels])
            result["rollout"] = {
                "params": [float(d1), float(d2), float(kappa)],
                "steps_done": int(rels.size),
                "final_rel_err": float(rels[-1]) if rels.size else float("nan"),
            }

    _write_json(artifact(out_dir, cfg.tag, "emulator-eval.json"), result)
    return result


# ------------------------------------------------------------------ report

def _flatten(prefix: str, obj, rows: list):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], rows)
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, rows)
    elif isinstance(obj, (int, float, str, bool)) or obj is None:
        rows.append((prefix, obj))


def run_report(cfg, out_dir) -> Path:
    out_dir = Path(out_dir)
    merged = {"tag": cfg.tag, "artifacts": {}}
    for path in sorted(out_dir.glob(f"{cfg.tag}-*.json")):
        name = path.stem[len(cfg.tag) + 1 :]
        if name in ("report",):
            continue
        merged["artifacts"][name] = json.loads(path.read_text())
    json_path = _write_json(artifact(out_dir, cfg.tag, "report.json"), merged)
    rows: list = []
    _flatten("", merged["artifacts"], rows)
    csv_path = artifact(out_dir, cfg.tag, "report.csv")
    with open(csv_path, "w") as fh:
        fh.write("key,value\n")
        for key, value in rows:
            fh.write(f"{key},{value}\n")
    return json_path
