"""Every shipped reference config runs with all pass flags true."""

import json
import pathlib

import pytest

import entrokit as ek

CONFIG_DIR = pathlib.Path(__file__).resolve().parent.parent / "configs"

CHAIN_CONFIGS = sorted(p for p in CONFIG_DIR.glob("*.json")
                       if p.name != "embed-check.json")


@pytest.mark.parametrize("path", CHAIN_CONFIGS, ids=lambda p: p.name)
def test_shipped_config_passes(path):
    cfg = ek.load_config(path)
    table = ek.run_experiment(cfg)
    assert table.all_passed
    assert table.rows


@pytest.mark.parametrize("path", CHAIN_CONFIGS, ids=lambda p: p.name)
def test_shipped_config_reruns_identically(path):
    cfg = ek.load_config(path)
    assert (ek.run_experiment(cfg).to_csv_bytes()
            == ek.run_experiment(cfg).to_csv_bytes())


def test_shipped_embed_check_config():
    cfg = json.loads((CONFIG_DIR / "embed-check.json").read_text())
    measure = ek.KLMeasure.from_config(cfg["kl"])
    f = ek.GridFunction01.from_callable(
        lambda x: x[:, 0], 1, cfg["f"]["grid_res"], lipschitz=1.0)
    rep = ek.isometry_check(f, measure, cfg["p"], cfg["samples"], cfg["seed"])
    assert rep.consistent
