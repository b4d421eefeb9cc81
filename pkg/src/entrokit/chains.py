"""Configuration-driven experiment chains with byte-stable CSV output.

Three experiments tie the modules together:

* uniform chain: exact entropy of a finite metric space K at 6 eps, the
  predicted lower bound 2^H(K; 6 eps) on the entropy of the unit Lipschitz
  ball over K, and the hat-family packing certificate at separation 3 eps.

* expectation chain: greedy sign code -> bump family on [0,1]^d ->
  embedding into L^p(mu) scaled by sqrt(lambda_d)/L so members live in the
  unit Lipschitz ball, with Monte-Carlo pairwise distances checked against
  cube quadrature and the predicted minimum separation.

* bits/accuracy sweep: quantized operator dictionaries against a target
  family, reported as a Pareto front, with the entropy floor column when
  the targets come from a metric-space instance.

Tables render to RFC-4180 CSV with LF line endings, '.' decimals and 17
significant digits, so identical (config, seed) pairs reproduce identical
bytes.  Configs are versioned JSON; unknown keys are errors.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import jsonschema

from . import __version__
from . import fno as fno_mod
from . import metricspace as ms
from . import packing as pk
from . import quantizer as qz
from . import randomfield as rf
from .errors import ConfigError, NoPacking
from .rng import STREAM_CHAIN_PAIRS, STREAM_SPACE_GEN, stream

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------
# result tables
# ---------------------------------------------------------------------


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    text = str(value)
    if any(ch in text for ch in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


@dataclass
class ResultTable:
    columns: List[str]
    rows: List[tuple]
    metadata: dict

    def to_csv_bytes(self) -> bytes:
        lines = [",".join(self.columns)]
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError("row width does not match columns")
            lines.append(",".join(_format_cell(v) for v in row))
        return ("\n".join(lines) + "\n").encode("utf-8")

    def write(self, path) -> None:
        """Atomic write: temp file in the target directory, then rename."""
        payload = self.to_csv_bytes()
        directory = os.path.dirname(os.path.abspath(path)) or "."
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    @property
    def all_passed(self) -> bool:
        if "passed" not in self.columns:
            return True
        i = self.columns.index("passed")
        j = self.columns.index("status") if "status" in self.columns else None
        relevant = [row for row in self.rows
                    if j is None or row[j] != "skipped"]
        return all(bool(row[i]) for row in relevant)


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------
# config schemas
# ---------------------------------------------------------------------

_SPACE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["circle", "line", "random", "file"]},
        "n": {"type": "integer", "minimum": 1},
        "circumference": {"type": "number", "exclusiveMinimum": 0},
        "spacing": {"type": "number", "exclusiveMinimum": 0},
        "dim": {"type": "integer", "minimum": 1, "maximum": 3},
        "path": {"type": "string"},
    },
}

_KL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["lambda", "law"],
    "properties": {
        "lambda": {"anyOf": [{"type": "string"},
                             {"type": "array", "items": {"type": "number"}}]},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "J": {"type": "integer", "minimum": 1},
        "law": {"enum": ["gaussian", "uniform"]},
    },
}

_HYPER_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dim", "d_in", "d_out", "d_c", "kappa", "depth"],
    "properties": {
        "dim": {"type": "integer", "minimum": 1, "maximum": 3},
        "d_in": {"type": "integer", "minimum": 1},
        "d_out": {"type": "integer", "minimum": 1},
        "d_c": {"type": "integer", "minimum": 1},
        "kappa": {"type": "integer", "minimum": 1},
        "depth": {"type": "integer", "minimum": 1},
        "activation": {"enum": ["relu", "gelu", "identity"]},
        "bias_mode": {"enum": ["constant", "spectral"]},
    },
}

_GRID_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["m", "delta"],
    "properties": {
        "m": {"type": "number", "exclusiveMinimum": 0},
        "delta": {"type": "number", "exclusiveMinimum": 0},
    },
}

UNIFORM_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "experiment", "seed", "space", "eps_ladder"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "experiment": {"const": "uniform-chain"},
        "seed": {"type": "integer"},
        "space": _SPACE_SCHEMA,
        "eps_ladder": {"type": "array", "minItems": 1,
                       "items": {"type": "number", "exclusiveMinimum": 0}},
    },
}

EXPECTATION_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "experiment", "seed", "kl", "p", "cells",
                 "grid_res", "mc_samples"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "experiment": {"const": "expectation-chain"},
        "seed": {"type": "integer"},
        "kl": _KL_SCHEMA,
        "p": {"type": "number", "minimum": 1},
        "dim": {"type": "integer", "minimum": 1, "maximum": 3},
        "dim_select": {
            "type": "object",
            "additionalProperties": False,
            "required": ["eps", "c1", "c2", "alpha"],
            "properties": {
                "eps": {"type": "number", "exclusiveMinimum": 0},
                "c1": {"type": "number", "exclusiveMinimum": 0},
                "c2": {"type": "number", "exclusiveMinimum": 0},
                "alpha": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "cells": {"type": "integer", "minimum": 2},
        "grid_res": {"type": "integer", "minimum": 2},
        "mc_samples": {"type": "integer", "minimum": 100},
        "max_pairs": {"type": "integer", "minimum": 1},
    },
}

BITS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "experiment", "seed", "targets", "hypers",
                 "grids"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "experiment": {"const": "bits-accuracy"},
        "seed": {"type": "integer"},
        "targets": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["hat-on-constants", "singleton-constant"]},
                "levels": {"type": "array", "minItems": 1,
                           "items": {"type": "number"}},
                "eps": {"type": "number", "exclusiveMinimum": 0},
                "value": {"type": "number"},
            },
        },
        "hypers": {"type": "array", "minItems": 1, "items": _HYPER_SCHEMA},
        "grids": {"type": "array", "minItems": 1, "items": _GRID_SCHEMA},
        "input_resolution": {"type": "integer", "minimum": 2},
        "max_random": {"type": "integer", "minimum": 1},
    },
}

_SCHEMAS = {
    "uniform-chain": UNIFORM_SCHEMA,
    "expectation-chain": EXPECTATION_SCHEMA,
    "bits-accuracy": BITS_SCHEMA,
}


def validate_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    kind = cfg.get("experiment")
    if kind not in _SCHEMAS:
        raise ConfigError(f"unknown experiment {kind!r}")
    try:
        jsonschema.validate(cfg, _SCHEMAS[kind])
    except jsonschema.ValidationError as err:
        raise ConfigError(err.message) from err
    return cfg


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return validate_config(json.load(fh))


# ---------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------


def build_space(spec: dict, seed: int) -> ms.FiniteMetricSpace:
    kind = spec["kind"]
    if kind == "circle":
        return ms.FiniteMetricSpace.circle(spec["n"], spec.get("circumference"))
    if kind == "line":
        return ms.FiniteMetricSpace.line(spec["n"], spec.get("spacing", 1.0))
    if kind == "random":
        rng = stream(seed, STREAM_SPACE_GEN)
        coords = rng.uniform(0.0, 1.0, (spec["n"], spec.get("dim", 2)))
        return ms.FiniteMetricSpace.from_coords(coords)
    if kind == "file":
        return ms.FiniteMetricSpace.from_file(spec["path"])
    raise ConfigError(f"unknown space kind {kind!r}")


def constant_input_space(levels: Sequence[float], resolution: int = 8):
    """Constant grid inputs u_i = c_i; their sup distances are |c_i - c_j|.

    Returns (metric space over the levels, list of matching grid inputs).
    """
    levels = [float(c) for c in levels]
    coords = np.array(levels)[:, None]
    space = ms.FiniteMetricSpace.from_coords(coords, labels=levels,
                                             metric="chebyshev")
    inputs = [fno_mod.GridFunction(1, np.full((resolution, 1), c))
              for c in levels]
    return space, inputs


# ---------------------------------------------------------------------
# experiment chains
# ---------------------------------------------------------------------


def run_uniform_chain(cfg: dict) -> ResultTable:
    validate_config(cfg)
    seed = cfg["seed"]
    space = build_space(cfg["space"], seed)
    columns = ["eps", "n_cover_6eps", "h_k_6eps", "predicted", "certified",
               "min_pairwise_supdist", "status", "passed"]
    rows = []
    for eps in cfg["eps_ladder"]:
        n6 = ms.exact_covering_number(space, 6 * eps).count
        h = math.log2(n6)
        predicted = pk.entropy_lower_bound_uniform(h)
        try:
            fam = pk.build_hat_family(space, eps)
        except NoPacking:
            rows.append((eps, n6, h, predicted, 0.0, 0.0, "skipped", False))
            continue
        rep = fam.verify(seed=seed)
        passed = rep.ok and fam.n_centers >= n6
        rows.append((eps, n6, h, predicted, float(fam.n_centers),
                     rep.min_pairwise_supdist, "ok", passed))
    meta = {"seed": seed, "config_hash": config_hash(cfg),
            "experiment": "uniform-chain", "version": __version__}
    return ResultTable(columns, rows, meta)


def _expectation_dim(cfg: dict) -> int:
    if "dim" in cfg and "dim_select" in cfg:
        raise ConfigError("give either dim or dim_select, not both")
    if "dim" in cfg:
        return cfg["dim"]
    if "dim_select" in cfg:
        sel = cfg["dim_select"]
        return pk.select_embedding_dimension(sel["eps"], sel["c1"], sel["c2"],
                                             sel["alpha"])
    raise ConfigError("expectation chain needs dim or dim_select")


def run_expectation_chain(cfg: dict) -> ResultTable:
    validate_config(cfg)
    seed = cfg["seed"]
    measure = rf.KLMeasure.from_config(cfg["kl"])
    p = float(cfg["p"])
    dim = _expectation_dim(cfg)
    if dim > measure.truncation:
        raise ConfigError("embedding dimension exceeds the KL truncation")
    cells = cfg["cells"]
    code = pk.volume_bound_code(cells**dim)
    family = pk.build_bump_family(dim, cells, cfg["grid_res"], code)

    lam_d = float(measure.eigenvalues[dim - 1])
    scale = math.sqrt(lam_d) / measure.density_bound
    predicted_min = scale * family.l1_floor
    log2_size_bound = (code.length / 8.0) * math.log2(math.e)

    n_pairs = int(code.size * (code.size - 1) / 2)
    max_pairs = cfg.get("max_pairs", 16)
    pair_rng = stream(seed, STREAM_CHAIN_PAIRS)
    all_pairs = [(i, j) for i in range(code.size) for j in range(i + 1, code.size)]
    if n_pairs > max_pairs:
        chosen = pair_rng.choice(n_pairs, size=max_pairs, replace=False)
        pairs = [all_pairs[int(t)] for t in sorted(chosen)]
    else:
        pairs = all_pairs

    grids = {}

    def member_grid(idx: int) -> rf.GridFunction01:
        if idx not in grids:
            grids[idx] = rf.GridFunction01(dim, family.member_on_nodes(idx),
                                           lipschitz=1.0)
        return grids[idx]

    columns = ["code_size", "log2_size_bound", "dim", "cells",
               "predicted_min_sep", "pair_a", "pair_b", "mc_dist", "mc_stderr",
               "quad_dist", "zscore", "passed"]
    rows = []
    for t, (a, b) in enumerate(pairs):
        diff_nodes = member_grid(a).values - member_grid(b).values
        diff = rf.GridFunction01(dim, diff_nodes)
        emb = rf.embed(diff, measure).scaled(scale)
        mc = rf.lp_norm_mc(emb, measure, p, cfg["mc_samples"], seed + t)
        quad_moment = scale**p * diff.quadrature_abs_pow(p)
        z = rf.moment_zscore(mc.moment, quad_moment, mc.moment_stderr)
        passed = (mc.estimate >= predicted_min - 3 * mc.stderr) and abs(z) <= 3
        rows.append((code.size, log2_size_bound, dim, cells, predicted_min,
                     a, b, mc.estimate, mc.stderr,
                     quad_moment ** (1.0 / p), z, passed))
    meta = {"seed": seed, "config_hash": config_hash(cfg),
            "experiment": "expectation-chain", "version": __version__,
            "code_size_ok": code.size >= code.target_size}
    return ResultTable(columns, rows, meta)


def run_bits_accuracy(cfg: dict) -> ResultTable:
    validate_config(cfg)
    seed = cfg["seed"]
    tspec = cfg["targets"]
    resolution = cfg.get("input_resolution", 8)
    entropy_floor: Optional[float] = None

    if tspec["kind"] == "hat-on-constants":
        levels = tspec.get("levels", [0.0, 1.0])
        eps = tspec.get("eps", 1.0 / 6.0)
        space, inputs = constant_input_space(levels, resolution)
        fam = pk.build_hat_family(space, eps)
        ids = tuple(range(len(inputs)))
        targets = [ms.SampledFunctional(ids, fam.member(
            [(s >> j) & 1 for j in range(fam.n_centers)]))
            for s in range(fam.size)]
        n6 = ms.exact_covering_number(space, 6 * eps).count
        entropy_floor = pk.entropy_lower_bound_uniform(math.log2(n6))
    elif tspec["kind"] == "singleton-constant":
        value = tspec.get("value", 0.0)
        levels = [0.0, 1.0]
        _, inputs = constant_input_space(levels, resolution)
        ids = tuple(range(len(inputs)))
        targets = [ms.SampledFunctional(ids, np.full(len(inputs), value))]
    else:
        raise ConfigError(f"unknown target kind {tspec['kind']!r}")

    hypers = [fno_mod.FnoHyper.from_json(h) for h in cfg["hypers"]]
    grids = [qz.QuantGrid(g["m"], g["delta"]) for g in cfg["grids"]]
    front = qz.accuracy_bits_sweep(targets, hypers, grids, inputs, seed,
                                   max_random=cfg.get("max_random", 1 << 12))
    if entropy_floor is None:
        columns = ["bits", "minimax_err", "hyper_id", "grid_id", "seed"]
        rows = [(r.bits, r.minimax_err, r.hyper_id, r.grid_id, r.seed)
                for r in front]
    else:
        columns = ["bits", "minimax_err", "hyper_id", "grid_id", "seed",
                   "entropy_floor"]
        rows = [(r.bits, r.minimax_err, r.hyper_id, r.grid_id, r.seed,
                 entropy_floor) for r in front]
    meta = {"seed": seed, "config_hash": config_hash(cfg),
            "experiment": "bits-accuracy", "version": __version__,
            "random_search_rows": sum(1 for r in front if not r.exhaustive)}
    return ResultTable(columns, rows, meta)


def run_experiment(cfg: dict) -> ResultTable:
    validate_config(cfg)
    runner = {
        "uniform-chain": run_uniform_chain,
        "expectation-chain": run_expectation_chain,
        "bits-accuracy": run_bits_accuracy,
    }[cfg["experiment"]]
    return runner(cfg)
