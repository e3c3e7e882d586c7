"""Experiment configuration: per-system defaults, INI round trip, JSON export.

The on-disk format is a flat key=value file with [sections] and # comments.
Every key has a typed default; unknown keys or sections are rejected so a
typo fails loudly instead of silently training with defaults.
"""

from __future__ import annotations

import configparser
import copy
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

SYSTEM_TAGS = ("linear", "sine-nonper", "sine-periodic", "rcr", "lorenz", "rd")
STRATEGIES = ("prior", "pc", "hd", "nf", "nf+pc")
SECTION_ORDER = ("experiment", "data", "emulator", "flow", "vae",
                 "sampling", "latent_flow")


@dataclass
class ExperimentConfig:
    experiment: dict
    data: dict
    emulator: dict
    flow: dict
    vae: dict
    sampling: dict
    latent_flow: dict

    @property
    def tag(self) -> str:
        return self.experiment["tag"]

    @property
    def seed(self) -> int:
        return self.experiment["seed"]

    @property
    def out(self) -> str:
        return self.experiment["out"]

    def section(self, name: str) -> dict:
        if name not in SECTION_ORDER:
            raise ConfigError(f"unknown config section {name!r}")
        return getattr(self, name)

    def as_dict(self) -> dict:
        return {s: dict(self.section(s)) for s in SECTION_ORDER}

    def copy(self) -> "ExperimentConfig":
        return ExperimentConfig(**copy.deepcopy(self.as_dict()))


# (width, depth, activation) triples and per-component training knobs follow
# the published tuning for each benchmark system.  Training-set sizes and
# epoch counts marked "choice" have no published value.
_BASE = {
    "experiment": {"tag": "linear", "seed": 0, "out": "runs"},
    "data": {
        "n_sims": 10000,
        "train_frac": 0.9,       # choice
        "points_per_sim": 30,    # time samples per trajectory (lorenz)
        "grid": 32,              # cells per side (rd)
        "cells_per_sim": 10,     # spatial samples per field (rd)
        "times_per_sim": 5,      # time samples per field (rd)
    },
    "emulator": {
        "mode": "direct", "width": 3, "depth": 2, "activation": "identity",
        "lr0": 1e-2, "gamma": 0.98, "batch": 128, "epochs": 500,
        "weight_decay": 0.0,
    },
    "flow": {
        "width": 6, "depth": 4, "couplings": 4, "batchnorm": False,
        "lr0": 1e-2, "gamma": 0.98, "batch": 128, "epochs": 500,
        "weight_decay": 0.0,
    },
    "vae": {
        "enc_width": 8, "enc_depth": 4, "enc_activation": "relu",
        "dec_width": 10, "dec_depth": 10, "dec_activation": "silu",
        "latent_dim": 1,
        "lambda_v": 1.0, "lambda_d": 40.0, "lambda_r": 0.0,
        "lr0": 1e-2, "gamma": 0.999, "batch": 64, "epochs": 500,
        "weight_decay": 1e-3,
    },
    "sampling": {
        "strategy": "prior", "n": 100, "R": 0, "S": 1000, "Q": 10,
        "draws_per_input": 1, "reject_above": float("inf"),
    },
    "latent_flow": {
        "width": 10, "depth": 4, "couplings": 6, "batchnorm": False,
        "lr0": 5e-3, "gamma": 0.995, "batch": 512, "epochs": 200,
        "weight_decay": 0.0,
    },
}

_PER_TAG = {
    "linear": {},
    "sine-nonper": {
        "data": {"n_sims": 10000},
        "emulator": {"width": 10, "depth": 4, "activation": "relu",
                     "gamma": 0.99, "batch": 128, "epochs": 2000},
        "flow": {"width": 10, "depth": 4, "couplings": 4, "gamma": 0.99,
                 "batch": 128, "epochs": 2000},
        "vae": {"enc_width": 10, "enc_depth": 4, "enc_activation": "relu",
                "dec_width": 10, "dec_depth": 10, "latent_dim": 1,
                "lambda_d": 200.0, "lambda_r": 0.0,
                "gamma": 0.998, "batch": 128, "epochs": 2000},
    },
    "sine-periodic": {
        "data": {"n_sims": 10000},
        "emulator": {"width": 16, "depth": 8, "activation": "silu",
                     "lr0": 1e-3, "gamma": 0.998, "batch": 64, "epochs": 2000},
        "flow": {"width": 10, "depth": 4, "couplings": 4, "lr0": 1e-3,
                 "gamma": 0.998, "batch": 64, "epochs": 2000},
        "vae": {"enc_width": 24, "enc_depth": 8, "enc_activation": "silu",
                "dec_width": 48, "dec_depth": 8, "latent_dim": 8,
                "lambda_d": 200.0, "lambda_r": 5.0,
                "lr0": 1e-3, "gamma": 0.999, "batch": 32, "epochs": 2000,
                "weight_decay": 0.0},
        "sampling": {"strategy": "pc", "R": 2, "S": 10000, "Q": 20},
        "latent_flow": {"width": 10, "depth": 4, "couplings": 6,
                        "lr0": 5e-3, "gamma": 0.995, "batch": 1024},
    },
    "rcr": {
        "data": {"n_sims": 10000},
        "emulator": {"width": 10, "depth": 6, "activation": "relu",
                     "gamma": 0.995, "batch": 128, "epochs": 1000},
        "flow": {"width": 10, "depth": 4, "couplings": 6, "gamma": 0.995,
                 "batch": 128, "epochs": 1000},
        "vae": {"enc_width": 10, "enc_depth": 4, "enc_activation": "relu",
                "dec_width": 10, "dec_depth": 10, "latent_dim": 1,
                "lambda_d": 400.0, "lambda_r": 0.0,
                "gamma": 0.9992, "batch": 128, "epochs": 1000},
        "sampling": {"strategy": "prior", "n": 50},
    },
    "lorenz": {
        "data": {"n_sims": 1000, "points_per_sim": 30},
        "emulator": {"mode": "residual", "width": 64, "depth": 15,
                     "activation": "silu", "lr0": 1e-3, "gamma": 0.999,
                     "batch": 512, "epochs": 1800, "weight_decay": 0.0},
        "flow": {"width": 12, "depth": 4, "couplings": 8, "lr0": 1e-3,
                 "gamma": 0.998, "batch": 512, "epochs": 1500},
        "vae": {"enc_width": 24, "enc_depth": 8, "enc_activation": "silu",
                "dec_width": 80, "dec_depth": 15, "latent_dim": 6,
                "lambda_d": 200.0, "lambda_r": 7.0,
                "lr0": 1e-3, "gamma": 0.999, "batch": 512, "epochs": 1400,
                "weight_decay": 0.0},
        "sampling": {"strategy": "nf", "n": 100, "R": 2, "S": 30000, "Q": 15},
        "latent_flow": {"width": 8, "depth": 4, "couplings": 6,
                        "lr0": 5e-3, "gamma": 0.995, "batch": 2048},
    },
    "rd": {
        "data": {"n_sims": 500},
        "emulator": {"mode": "residual", "width": 96, "depth": 12,
                     "activation": "silu", "lr0": 1e-3, "gamma": 0.999,
                     "batch": 1024, "epochs": 3000, "weight_decay": 0.0},
        "flow": {"width": 12, "depth": 4, "couplings": 8, "lr0": 1e-3,
                 "gamma": 0.998, "batch": 1024, "epochs": 3000},
        "vae": {"enc_width": 16, "enc_depth": 8, "enc_activation": "silu",
                "dec_width": 64, "dec_depth": 8, "latent_dim": 8,
                "lambda_d": 200.0, "lambda_r": 5.0,
                "lr0": 1e-3, "gamma": 0.998, "batch": 1024, "epochs": 3000,
                "weight_decay": 0.0},
        "sampling": {"strategy": "pc", "n": 100, "R": 6, "S": 50000, "Q": 10},
        "latent_flow": {"width": 10, "depth": 4, "couplings": 6,
                        "lr0": 1e-2, "gamma": 0.995, "batch": 2048},
    },
}


def defaults(tag: str) -> ExperimentConfig:
    """Complete config for one system, published values where they exist."""
    if tag not in SYSTEM_TAGS:
        raise ConfigError(f"unknown system tag {tag!r}; choose from {SYSTEM_TAGS}")
    sections = copy.deepcopy(_BASE)
    sections["experiment"]["tag"] = tag
    for name, overrides in _PER_TAG[tag].items():
        sections[name].update(overrides)
    return ExperimentConfig(**sections)


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.tag not in SYSTEM_TAGS:
        raise ConfigError(f"unknown system tag {cfg.tag!r}")
    if cfg.sampling["strategy"] not in STRATEGIES:
        raise ConfigError(
            f"unknown sampling strategy {cfg.sampling['strategy']!r}; "
            f"choose from {STRATEGIES}")
    if cfg.emulator["mode"] not in ("direct", "residual"):
        raise ConfigError(f"emulator mode must be direct or residual")
    for sec in ("emulator", "flow", "vae", "latent_flow"):
        d = cfg.section(sec)
        for key in ("lr0", "gamma", "batch", "epochs"):
            if d[key] <= 0:
                raise ConfigError(f"[{sec}] {key} must be positive")
    if not 0.0 < cfg.data["train_frac"] <= 1.0:
        raise ConfigError("[data] train_frac must be in (0, 1]")
    for key in ("n", "S", "Q"):
        if cfg.sampling[key] < 1:
            raise ConfigError(f"[sampling] {key} must be >= 1")
    if cfg.sampling["R"] < 0:
        raise ConfigError("[sampling] R must be >= 0")
    return cfg


def _coerce(section: str, key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(
            f"[{section}] {key}={raw!r} is not a valid "
            f"{type(default).__name__}") from None


def from_dict(d: dict) -> ExperimentConfig:
    try:
        tag = d["experiment"]["tag"]
    except (KeyError, TypeError):
        raise ConfigError("config must set tag in the [experiment] section") from None
    cfg = defaults(tag)
    for section, body in d.items():
        if section not in SECTION_ORDER:
            raise ConfigError(f"unknown config section [{section}]")
        target = cfg.section(section)
        for key, value in body.items():
            if key not in target:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            default = target[key]
            if isinstance(value, str) and not isinstance(default, str):
                value = _coerce(section, key, value, default)
            elif isinstance(default, bool) and not isinstance(value, bool):
                raise ConfigError(f"[{section}] {key} must be a boolean")
            elif isinstance(default, float) and isinstance(value, (int, float)) \
                    and not isinstance(value, bool):
                value = float(value)
            elif isinstance(default, int) and not isinstance(value, int):
                raise ConfigError(f"[{section}] {key} must be an integer")
            target[key] = value
    return validate(cfg)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_ini(cfg: ExperimentConfig) -> str:
    lines = ["# experiment configuration (key = value; lines starting with # are ignored)"]
    for section in SECTION_ORDER:
        lines.append("")
        lines.append(f"[{section}]")
        for key, value in cfg.section(section).items():
            lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def from_ini(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep key case (R vs r)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from None
    return from_dict({s: dict(parser.items(s)) for s in parser.sections()})


def to_json(cfg: ExperimentConfig) -> str:
    body = {s: {k: (None if isinstance(v, float) and v != v else v)
                for k, v in cfg.section(s).items()}
            for s in SECTION_ORDER}
    # inf round-trips through repr in INI but not through strict JSON
    for s in SECTION_ORDER:
        for k, v in cfg.section(s).items():
            if isinstance(v, float) and (v == float("inf") or v == float("-inf")):
                body[s][k] = repr(v)
    return json.dumps(body, sort_keys=True, indent=1) + "\n"


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix == ".json":
        try:
            return from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON config: {exc}") from None
    return from_ini(text)


def save_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".json":
        path.write_text(to_json(cfg))
    else:
        path.write_text(to_ini(cfg))
    return path
