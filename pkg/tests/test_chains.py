"""Experiment chains: schema validation, pass flags, byte determinism."""

import math

import pytest

import entrokit as ek
from entrokit.chains import ResultTable, config_hash


UNIFORM_CFG = {
    "schema_version": 1,
    "experiment": "uniform-chain",
    "seed": 7,
    "space": {"kind": "circle", "n": 8},
    "eps_ladder": [1 / 6],
}

EXPECT_CFG = {
    "schema_version": 1,
    "experiment": "expectation-chain",
    "seed": 3,
    "kl": {"lambda": "j^-2a", "alpha": 1.0, "J": 64, "law": "gaussian"},
    "p": 1,
    "dim": 1,
    "cells": 2,
    "grid_res": 16,
    "mc_samples": 20000,
}

BITS_CFG = {
    "schema_version": 1,
    "experiment": "bits-accuracy",
    "seed": 5,
    "targets": {"kind": "hat-on-constants", "levels": [0.0, 1.0], "eps": 1 / 6},
    "hypers": [{"dim": 1, "d_in": 1, "d_out": 1, "d_c": 1, "kappa": 1,
                "depth": 1, "activation": "identity"}],
    "grids": [{"m": 1.0, "delta": 1.0}, {"m": 1.0, "delta": 0.5}],
    "input_resolution": 8,
}


# -- config validation ----------------------------------------------------


def test_unknown_keys_are_errors():
    bad = dict(UNIFORM_CFG, plot=True)
    with pytest.raises(ek.ConfigError):
        ek.validate_config(bad)


def test_wrong_schema_version_rejected():
    bad = dict(UNIFORM_CFG, schema_version=2)
    with pytest.raises(ek.ConfigError):
        ek.validate_config(bad)


def test_unknown_experiment_rejected():
    with pytest.raises(ek.ConfigError):
        ek.validate_config({"schema_version": 1, "experiment": "nope", "seed": 0})


def test_dim_and_dim_select_exclusive():
    bad = dict(EXPECT_CFG, dim_select={"eps": 0.25, "c1": 2.0, "c2": 1.0,
                                       "alpha": 0.5})
    with pytest.raises(ek.ConfigError):
        ek.run_expectation_chain(bad)


# -- table formatting -------------------------------------------------------


def test_csv_formatting_rules():
    t = ResultTable(["a", "b", "c"], [(1, 0.5, "x,y"), (2, 1.0, 'q"r')], {})
    text = t.to_csv_bytes().decode()
    assert text.splitlines()[0] == "a,b,c"
    assert '"x,y"' in text and '"q""r"' in text
    assert "\r" not in text
    assert text.endswith("\n")


def test_csv_17_digit_floats():
    t = ResultTable(["v"], [(1 / 3,)], {})
    assert t.to_csv_bytes().decode().splitlines()[1] == "0.33333333333333331"


def test_atomic_write(tmp_path):
    t = ResultTable(["v"], [(1,)], {})
    path = tmp_path / "out.csv"
    t.write(path)
    assert path.read_bytes() == t.to_csv_bytes()
    assert list(tmp_path.iterdir()) == [path]  # no temp residue


def test_config_hash_stable_under_key_order():
    a = {"x": 1, "y": [1, 2]}
    b = {"y": [1, 2], "x": 1}
    assert config_hash(a) == config_hash(b)


# -- uniform chain ----------------------------------------------------------


def test_uniform_chain_circle_reference():
    t = ek.run_uniform_chain(UNIFORM_CFG)
    assert t.all_passed
    row = dict(zip(t.columns, t.rows[0]))
    assert row["n_cover_6eps"] == 3
    assert row["certified"] == 8.0
    assert row["predicted"] == pytest.approx(3.0)
    assert row["certified"] >= row["h_k_6eps"]


def test_uniform_chain_degenerate_row_skipped():
    cfg = dict(UNIFORM_CFG, space={"kind": "line", "n": 3, "spacing": 0.5},
               eps_ladder=[0.2, 0.05])
    t = ek.run_uniform_chain(cfg)
    status = t.column("status")
    assert status[0] == "skipped" and status[1] == "ok"
    assert t.all_passed  # skipped rows do not fail the run


def test_uniform_chain_byte_identical():
    a = ek.run_uniform_chain(UNIFORM_CFG).to_csv_bytes()
    b = ek.run_uniform_chain(UNIFORM_CFG).to_csv_bytes()
    assert a == b


# -- expectation chain ----------------------------------------------------------


def test_expectation_chain_reference():
    t = ek.run_expectation_chain(EXPECT_CFG)
    assert t.all_passed
    assert t.metadata["code_size_ok"]
    row = dict(zip(t.columns, t.rows[0]))
    assert row["predicted_min_sep"] == pytest.approx(
        math.sqrt(1.0) / 1.0 / (8 * math.e * 1 * 2))
    assert row["mc_dist"] >= row["predicted_min_sep"] - 3 * row["mc_stderr"]
    assert abs(row["zscore"]) <= 3
    assert row["log2_size_bound"] == pytest.approx((2 / 8) * math.log2(math.e))


def test_expectation_chain_dim_select():
    cfg = dict(EXPECT_CFG, p=2, grid_res=24,
               dim_select={"eps": 0.25, "c1": 2.0, "c2": 1.0, "alpha": 0.5})
    del cfg["dim"]
    t = ek.run_expectation_chain(cfg)
    assert t.column("dim")[0] == 2
    assert t.all_passed


def test_expectation_chain_byte_identical():
    a = ek.run_expectation_chain(EXPECT_CFG).to_csv_bytes()
    b = ek.run_expectation_chain(EXPECT_CFG).to_csv_bytes()
    assert a == b


# -- bits accuracy ---------------------------------------------------------------


def test_bits_accuracy_hat_targets():
    t = ek.run_bits_accuracy(BITS_CFG)
    assert t.columns == ["bits", "minimax_err", "hyper_id", "grid_id", "seed",
                         "entropy_floor"]
    errs = t.column("minimax_err")
    assert errs == sorted(errs, reverse=True)
    # volume floor: errors below 3 eps need at least log2(4) - 1 = 1 bit
    for bits, err in zip(t.column("bits"), errs):
        if err < 0.5:
            assert bits >= 1


def test_bits_accuracy_singleton_target():
    cfg = dict(BITS_CFG, targets={"kind": "singleton-constant", "value": 0.0},
               grids=[{"m": 1.0, "delta": 1.0}])
    t = ek.run_bits_accuracy(cfg)
    assert t.columns == ["bits", "minimax_err", "hyper_id", "grid_id", "seed"]
    assert t.rows[0][1] == pytest.approx(0.0, abs=1e-12)


def test_bits_accuracy_deterministic():
    a = ek.run_bits_accuracy(BITS_CFG).to_csv_bytes()
    b = ek.run_bits_accuracy(BITS_CFG).to_csv_bytes()
    assert a == b


def test_run_experiment_dispatch():
    t = ek.run_experiment(UNIFORM_CFG)
    assert t.metadata["experiment"] == "uniform-chain"
