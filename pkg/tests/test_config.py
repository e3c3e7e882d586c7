"""Experiment configuration: defaults, file round trips, validation."""

import math

import pytest

from invnet import config as cfgmod
from invnet.config import (
    ExperimentConfig,
    defaults,
    from_dict,
    load_config,
    save_config,
    validate,
)
from invnet.errors import ConfigError


def test_defaults_exist_for_every_tag():
    for tag in cfgmod.SYSTEM_TAGS:
        cfg = defaults(tag)
        validate(cfg)
        assert cfg.tag == tag


def test_defaults_reject_unknown_tag():
    with pytest.raises(ConfigError):
        defaults("heat-equation")


def test_known_hyperparameter_spot_checks():
    lin = defaults("linear")
    assert lin.section("emulator")["lr0"] == 1e-2
    assert lin.section("vae")["lambda_d"] == 40.0
    assert lin.section("vae")["latent_dim"] == 1

    per = defaults("sine-periodic")
    assert per.section("vae")["latent_dim"] == 8
    assert per.section("vae")["lambda_r"] == 5.0
    assert per.section("sampling")["R"] == 2

    lor = defaults("lorenz")
    assert lor.section("emulator")["mode"] == "residual"
    assert lor.section("emulator")["width"] == 64
    assert lor.section("vae")["latent_dim"] == 6
    assert lor.section("sampling")["strategy"] == "nf"

    rd = defaults("rd")
    assert rd.section("vae")["latent_dim"] == 8
    assert rd.section("sampling")["R"] == 6
    assert rd.section("latent_flow")["lr0"] == 1e-2


def test_ini_round_trip(tmp_path):
    cfg = defaults("rcr")
    path = tmp_path / "rcr.ini"
    save_config(cfg, path)
    back = load_config(path)
    assert back.as_dict() == cfg.as_dict()


def test_json_round_trip(tmp_path):
    cfg = defaults("sine-nonper")
    path = tmp_path / "cfg.json"
    save_config(cfg, path)
    back = load_config(path)
    assert back.as_dict() == cfg.as_dict()


def test_infinite_threshold_survives_round_trip(tmp_path):
    cfg = defaults("linear")
    assert cfg.section("sampling")["reject_above"] == math.inf
    for name in ("a.ini", "a.json"):
        save_config(cfg, tmp_path / name)
        back = load_config(tmp_path / name)
        assert back.section("sampling")["reject_above"] == math.inf


def test_from_dict_rejects_unknown_sections_and_keys():
    base = defaults("linear").as_dict()
    bad = dict(base)
    bad["turbo"] = {"x": 1}
    with pytest.raises(ConfigError):
        from_dict(bad)
    bad2 = {k: dict(v) for k, v in base.items()}
    bad2["vae"]["lambda_z"] = 3.0
    with pytest.raises(ConfigError):
        from_dict(bad2)


def test_from_dict_coerces_types():
    d = {k: dict(v) for k, v in defaults("linear").as_dict().items()}
    d["emulator"]["epochs"] = "250"
    d["vae"]["lambda_d"] = "12.5"
    d["flow"]["batchnorm"] = "true"
    cfg = from_dict(d)
    assert cfg.section("emulator")["epochs"] == 250
    assert cfg.section("vae")["lambda_d"] == 12.5
    assert cfg.section("flow")["batchnorm"] is True


def test_validate_catches_bad_values():
    cfg = defaults("linear")
    cfg.section("emulator")["lr0"] = -1.0
    with pytest.raises(ConfigError):
        validate(cfg)
    cfg2 = defaults("linear")
    cfg2.section("sampling")["strategy"] = "guess"
    with pytest.raises(ConfigError):
        validate(cfg2)
    cfg3 = defaults("linear")
    cfg3.section("data")["train_frac"] = 1.5
    with pytest.raises(ConfigError):
        validate(cfg3)


def test_copy_is_deep():
    cfg = defaults("linear")
    dup = cfg.copy()
    dup.section("vae")["lambda_d"] = 999.0
    assert cfg.section("vae")["lambda_d"] == 40.0


def test_experiment_properties():
    cfg = defaults("lorenz")
    cfg.section("experiment")["seed"] = 77
    assert cfg.tag == "lorenz" and cfg.seed == 77
    assert isinstance(cfg.out, str)
    assert isinstance(cfg, ExperimentConfig)
