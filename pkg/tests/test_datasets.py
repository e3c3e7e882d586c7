"""Dataset container, split determinism, and the CSV/JSON disk format."""

import numpy as np
import pytest

from invnet.errors import DataError
from invnet.rng import Rng
from invnet.systems import linear, lorenz
from invnet.systems.base import (
    Dataset,
    generate_dataset,
    load_dataset,
    save_dataset,
    split_indices,
)


def test_split_sizes_partition_and_determinism():
    tr, te = split_indices(100, 0.8, Rng(3))
    assert len(tr) == 80 and len(te) == 20
    assert np.array_equal(np.sort(np.concatenate([tr, te])), np.arange(100))
    tr2, te2 = split_indices(100, 0.8, Rng(3))
    assert np.array_equal(tr, tr2) and np.array_equal(te, te2)
    # sorted outputs
    assert np.all(np.diff(tr) > 0) and np.all(np.diff(te) > 0)


def test_split_full_train_and_validation():
    tr, te = split_indices(10, 1.0, Rng(0))
    assert len(tr) == 10 and len(te) == 0
    with pytest.raises(ValueError):
        split_indices(10, 0.0, Rng(0))


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset("linear", np.zeros((3, 2)), np.zeros((4, 1)),
                ["a", "b"], ["y"])
    with pytest.raises(DataError):
        Dataset("linear", np.zeros((3, 2)), np.full((3, 1), np.nan),
                ["a", "b"], ["y"])
    with pytest.raises(DataError):
        Dataset("linear", np.zeros((3, 2)), np.zeros((3, 1)), ["a"], ["y"])


def test_round_trip_is_bit_exact(tmp_path):
    ds = linear.generate(50, Rng(8))
    csv_path = save_dataset(ds, tmp_path / "lin")
    back = load_dataset(csv_path)
    assert np.array_equal(back.v, ds.v)
    assert np.array_equal(back.y, ds.y)
    assert back.tag == "linear" and back.v_names == ds.v_names
    assert back.meta == ds.meta


def test_round_trip_with_aux_and_layout(tmp_path):
    ds = lorenz.generate(2, Rng(9), points_per_sim=3, t_end=0.02)
    save_dataset(ds, tmp_path / "lor")
    back = load_dataset(tmp_path / "lor")
    assert np.array_equal(back.aux, ds.aux)
    assert back.layout == ds.layout
    assert back.scaling is False
    assert back.aux_names == ds.aux_names


def test_save_twice_is_byte_identical(tmp_path):
    ds = linear.generate(20, Rng(1))
    a = save_dataset(ds, tmp_path / "a").read_bytes()
    b = save_dataset(ds, tmp_path / "b").read_bytes()
    assert a == b


def test_load_missing_and_corrupt(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path / "absent")
    ds = linear.generate(5, Rng(1))
    save_dataset(ds, tmp_path / "c")
    (tmp_path / "c.json").write_text("{broken")
    with pytest.raises(DataError):
        load_dataset(tmp_path / "c")


def test_generate_dispatch_matches_module_call():
    via_dispatch = generate_dataset("linear", 25, seed=4)
    direct = linear.generate(25, Rng(4))
    assert np.array_equal(via_dispatch.v, direct.v)
    assert via_dispatch.seed == 4
    with pytest.raises(DataError):
        generate_dataset("unknown-system", 5, seed=0)
