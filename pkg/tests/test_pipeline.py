"""End-to-end harness on a miniature linear experiment."""

import json

import numpy as np
import pytest

from invnet.config import defaults
from invnet.emulator import emulate
from invnet.errors import DataError
from invnet.pipeline import (
    artifact,
    interrogate,
    load_bundle,
    load_experiment_dataset,
    make_resolver,
    run_generate,
    run_invert,
    run_report,
    run_sample_outputs,
    run_train,
    run_verify,
)
from invnet.rng import Rng
from invnet.sampling import invert
from invnet.systems import linear


@pytest.fixture(scope="module")
def micro_cfg():
    cfg = defaults("linear")
    cfg.section("experiment")["seed"] = 11
    cfg.section("data")["n_sims"] = 300
    for sec in ("emulator", "flow", "vae"):
        cfg.section(sec)["epochs"] = 30
    cfg.section("sampling")["n"] = 16
    cfg.section("sampling")["S"] = 100
    cfg.section("sampling")["Q"] = 4
    cfg.section("latent_flow")["epochs"] = 10
    return cfg


@pytest.fixture(scope="module")
def trained(micro_cfg, tmp_path_factory):
    out = tmp_path_factory.mktemp("lin")
    run_generate(micro_cfg, out)
    run_train(micro_cfg, out, component="all")
    return out


def test_generate_writes_dataset(micro_cfg, trained):
    ds = load_experiment_dataset(micro_cfg, trained)
    assert ds.n == 300 and ds.tag == "linear"
    assert artifact(trained, "linear", "data.csv").exists()
    assert artifact(trained, "linear", "data.json").exists()


def test_missing_dataset_says_generate_first(micro_cfg, tmp_path):
    with pytest.raises(DataError, match="generate-data"):
        load_experiment_dataset(micro_cfg, tmp_path)


def test_train_all_saves_bundle_and_histories(micro_cfg, trained):
    bundle = load_bundle(micro_cfg, trained)
    assert bundle.tag == "linear"
    assert bundle.emulator is not None and bundle.flow is not None
    assert bundle.encoder is not None and bundle.decoder is not None
    assert bundle.meta["seed"] == 11
    for name in ("history-emulator.csv", "history-flow.csv", "history-vae.csv"):
        assert artifact(trained, "linear", name).exists()
    # decoder shares the emulator's input statistics
    assert bundle.decoder.stats_v == bundle.emulator.stats_v


def test_component_retrain_updates_only_that_part(micro_cfg, trained, tmp_path):
    bundle = load_bundle(micro_cfg, trained)
    ds = load_experiment_dataset(micro_cfg, trained)
    # retraining just the flow leaves emulator weights untouched on disk
    cfg2 = micro_cfg.copy()
    cfg2.section("flow")["epochs"] = 5
    import shutil

    for suffix in ("data.csv", "data.json", "model.bin"):
        shutil.copy(artifact(trained, "linear", suffix),
                    artifact(tmp_path, "linear", suffix))
    run_train(cfg2, tmp_path, component="flow")
    again = load_bundle(cfg2, tmp_path)
    for a, b in zip(again.emulator.net.params(), bundle.emulator.net.params()):
        assert np.array_equal(a.data, b.data)
    assert ds.n == 300


def test_sample_outputs_artifacts(micro_cfg, trained):
    path = run_sample_outputs(micro_cfg, trained, n=32)
    table = np.loadtxt(path, delimiter=",", skiprows=1)
    assert table.shape == (32, 2)
    side = json.loads(artifact(trained, "linear", "samples.json").read_text())
    assert side["n"] == 32


def test_interrogate_strategies_and_provenance(micro_cfg, trained):
    bundle = load_bundle(micro_cfg, trained)
    ds = load_experiment_dataset(micro_cfg, trained)
    ystar = np.array([14.64968621, 14.64968621])
    for strategy in ("prior", "pc", "hd", "nf", "nf+pc"):
        cfg = micro_cfg.copy()
        cfg.section("sampling")["strategy"] = strategy
        vhat, wset, lf = interrogate(cfg, bundle, ystar, Rng(11), ds=ds)
        assert vhat.shape[1] == 3
        assert wset.tag == strategy
        if strategy.startswith("nf"):
            assert lf is not None
        # decoded rows reproduce invert() on the same latent set
        assert np.array_equal(vhat, invert(bundle.decoder, ystar, wset))


def test_invert_verify_report_chain(micro_cfg, trained):
    cfg = micro_cfg.copy()
    cfg.section("sampling")["strategy"] = "pc"
    ystar = [14.64968621, 14.64968621]
    run_invert(cfg, trained, ystar)
    inv_csv = artifact(trained, "linear", "invert-pc.csv")
    assert inv_csv.exists()
    table = np.loadtxt(inv_csv, delimiter=",", skiprows=1, ndmin=2)
    assert table.shape == (16, 1 + 3)  # w column plus three inputs

    rep = run_verify(cfg, trained, oracle="exact")
    ver = json.loads(artifact(trained, "linear", "verify-pc.json").read_text())
    assert ver["summary"]["n"] == 16
    assert ver["strategy"] == "pc"
    assert rep.summary == ver["summary"]

    report = run_report(cfg, trained)
    merged = json.loads(report.read_text())
    assert merged["tag"] == "linear"
    assert "verify-pc" in merged["artifacts"]
    assert artifact(trained, "linear", "report.csv").exists()


def test_emulator_resolver_matches_direct_emulation(micro_cfg, trained):
    bundle = load_bundle(micro_cfg, trained)
    resolver = make_resolver(micro_cfg, "emulator", bundle)
    v = Rng(3).uniform(0.0, 5.0, (10, 3))
    assert np.array_equal(resolver(v, rng=None), emulate(bundle.emulator, v))
    exact = make_resolver(micro_cfg, "exact")
    assert np.array_equal(exact(v, rng=None), linear.linear_forward(v))


def test_rerun_is_byte_identical(micro_cfg, tmp_path_factory):
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path_factory.mktemp(name)
        run_generate(micro_cfg, out)
        run_train(micro_cfg, out, component="all")
        outs.append(out)
    for suffix in ("data.csv", "model.bin", "history-vae.csv"):
        a = artifact(outs[0], "linear", suffix).read_bytes()
        b = artifact(outs[1], "linear", suffix).read_bytes()
        assert a == b
