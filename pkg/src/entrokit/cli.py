"""Command-line interface.

Subcommands mirror the library surface: codelength, hat, gv, bump,
embed-check, fno, quantize, sweep, chain-uniform, chain-expectation.
Reports print as JSON on stdout; tables write CSV via --out.  The process
exits 0 only when every pass flag in the run is true.
"""

from __future__ import annotations

import json
import sys

import click

from . import __version__
from . import chains
from . import fno as fno_mod
from . import metricspace as ms
from . import packing as pk
from . import quantizer as qz
from . import randomfield as rf
from .rng import STREAM_PARAM_GEN, stream


def _emit(obj) -> None:
    click.echo(json.dumps(obj, indent=2, sort_keys=True))


def _finish(ok: bool) -> None:
    sys.exit(0 if ok else 1)


@click.group()
@click.version_option(__version__)
@click.option("--seed", type=int, default=None, help="Root seed override.")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Default config file for subcommands that accept one.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Default output file for subcommands that write tables.")
@click.pass_context
def main(ctx, seed, config_path, out_path):
    """Metric-entropy constructions, packings, embeddings, and quantized
    output-averaged Fourier neural operators."""
    ctx.obj = {"seed": seed, "config": config_path, "out": out_path}


def _resolve(ctx, key, local):
    return local if local is not None else ctx.obj.get(key)


def _load_table_config(ctx, config):
    path = _resolve(ctx, "config", config)
    if path is None:
        raise click.UsageError("a config file is required (--config)")
    cfg = chains.load_config(path)
    seed = _resolve(ctx, "seed", None)
    if seed is not None:
        cfg = dict(cfg, seed=seed)
    return cfg


@main.command()
@click.option("--space", "space_path", type=click.Path(exists=True), required=True)
@click.option("--eps", type=float, required=True)
@click.option("--decoder", type=click.Choice(["ambient", "restricted", "both"]),
              default="ambient", show_default=True)
def codelength(space_path, eps, decoder):
    """Covering number, entropy, and minimax code length of a space file."""
    space = ms.FiniteMetricSpace.from_file(space_path)
    report = ms.code_length_report(space, eps)
    out = {"N": report["N"], "H": report["H"], "B": report["B"]}
    if decoder == "restricted":
        out["B"] = report["B_restricted"]
    elif decoder == "both":
        out["B_restricted"] = report["B_restricted"]
    _emit(out)


@main.command()
@click.option("--space", "space_path", type=click.Path(exists=True), required=True)
@click.option("--eps", type=float, required=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def hat(ctx, space_path, eps, out_path):
    """Build and verify a hat family; print its manifest."""
    space = ms.FiniteMetricSpace.from_file(space_path)
    fam = pk.build_hat_family(space, eps)
    rep = fam.verify()
    manifest = fam.manifest()
    manifest["verification"] = {
        "min_pairwise_supdist": rep.min_pairwise_supdist,
        "pairwise_exhaustive": rep.pairwise_exhaustive,
        "sup_max": rep.sup_max,
        "lipschitz_max": rep.lipschitz_max,
        "ok": rep.ok,
    }
    _emit(manifest)
    path = _resolve(ctx, "out", out_path)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
    _finish(rep.ok)


@main.command()
@click.option("--n", type=int, required=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def gv(ctx, n, out_path):
    """Greedy sign code of length n; print its manifest."""
    code = pk.gilbert_varshamov(n)
    manifest = code.manifest()
    manifest["measured_min_distance"] = code.pairwise_min_hamming()
    ok = (manifest["measured_min_distance"] >= code.min_distance
          and code.size >= code.target_size)
    manifest["ok"] = ok
    _emit(manifest)
    path = _resolve(ctx, "out", out_path)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
    _finish(ok)


@main.command()
@click.option("--d", "dim", type=int, required=True)
@click.option("--n", "cells", type=int, required=True, help="Cells per axis.")
@click.option("--grid", "grid_res", type=int, required=True)
@click.option("--lam", type=float, default=None,
              help="Plateau parameter; defaults to 1/(1+d).")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def bump(ctx, dim, cells, grid_res, lam, out_path):
    """Build and verify a bump family; print its manifest and report."""
    code = pk.volume_bound_code(cells**dim)
    fam = pk.build_bump_family(dim, cells, grid_res, code, lam)
    rep = fam.verify()
    manifest = fam.manifest()
    manifest["verification"] = {
        "min_pairwise_l1": rep.min_pairwise_l1,
        "pairwise_lower": rep.pairwise_lower,
        "l1_floor": rep.l1_floor,
        "sup_max": rep.sup_max,
        "lipschitz_max": rep.lipschitz_max,
        "cell_profile_l1": rep.cell_profile_l1,
        "ok": rep.ok,
    }
    _emit(manifest)
    path = _resolve(ctx, "out", out_path)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
    _finish(rep.ok)


@main.command("embed-check")
@click.option("--config", "config_path", type=click.Path(exists=True),
              required=True)
@click.pass_context
def embed_check(ctx, config_path):
    """Isometry report for an embedded grid function (JSON config).

    Config keys: kl (measure block), f ("constant"|"coordinate" with
    optional value/grid_res), p, samples, seed.
    """
    with open(config_path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    measure = rf.KLMeasure.from_config(cfg["kl"])
    fspec = cfg.get("f", {"kind": "coordinate"})
    res = fspec.get("grid_res", 16)
    if fspec["kind"] == "constant":
        f = rf.GridFunction01.constant(fspec.get("value", 1.0))
    elif fspec["kind"] == "coordinate":
        f = rf.GridFunction01.from_callable(lambda x: x[:, 0], 1, res,
                                            lipschitz=1.0)
    else:
        raise click.UsageError(f"unknown f kind {fspec['kind']!r}")
    seed = _resolve(ctx, "seed", None) or cfg.get("seed", 0)
    report = rf.isometry_check(f, measure, cfg.get("p", 2),
                               cfg.get("samples", 100000), seed)
    _emit({
        "mc_moment": report.mc_moment,
        "quad_moment": report.quad_moment,
        "zscore": report.zscore,
        "estimate": report.mc.estimate,
        "stderr": report.mc.stderr,
        "consistent": report.consistent,
    })
    _finish(report.consistent)


@main.command("fno")
@click.option("--hyper", "hyper_path", type=click.Path(exists=True), required=True)
@click.option("--params", "params_path", type=click.Path(exists=True), required=True)
@click.option("--input", "input_path", type=click.Path(exists=True), required=True)
def fno_eval(hyper_path, params_path, input_path):
    """Evaluate an output-averaged operator; print the scalar."""
    hyper = fno_mod.load_hyper(hyper_path)
    params = fno_mod.load_params(hyper, params_path)
    with open(input_path, "r", encoding="utf-8") as fh:
        u = fno_mod.GridFunction.from_json(json.load(fh))
    click.echo("%.17g" % fno_mod.forward(params, u))


@main.command("quantize")
@click.option("--hyper", "hyper_path", type=click.Path(exists=True), required=True)
@click.option("--delta", type=float, required=True)
@click.option("--m", "--M", "box", type=float, required=True,
              help="Parameter range M.")
@click.option("--seed", type=int, default=None)
@click.option("--n-inputs", type=int, default=64, show_default=True)
@click.option("--probes", type=int, default=128, show_default=True)
@click.option("--c", "c_override", type=float, default=None,
              help="Skip calibration and use this C in the bound.")
@click.pass_context
def quantize_cmd(ctx, hyper_path, delta, box, seed, n_inputs, probes, c_override):
    """End-to-end quantization certificate for a random parameter vector."""
    hyper = fno_mod.load_hyper(hyper_path)
    seed = _resolve(ctx, "seed", seed)
    if seed is None:
        seed = 0
    inputs = fno_mod.random_inputs(hyper, n_inputs, seed)
    if c_override is None:
        c_value = qz.calibrate_c(hyper, box, inputs, probes, seed)
    else:
        c_value = c_override
    log2_bound = qz.theoretical_lip_bound(qz.LipBoundInputs(
        hyper.depth, hyper.d_c, hyper.kappa, hyper.dim, box, c_value))
    grid = qz.QuantGrid(box, delta)
    rng = stream(seed, STREAM_PARAM_GEN)
    params = fno_mod.FnoParams.random(hyper, box, rng)
    cert = qz.certify_quantization(params, grid, inputs, 2.0**log2_bound)
    _emit({
        "measured_err": cert.measured_err,
        "lip_estimate": cert.lip_estimate,
        "log2_lip_bound": log2_bound,
        "calibrated_c": c_value,
        "delta": cert.delta,
        "bound": cert.bound,
        "passed": cert.passed,
    })
    _finish(cert.passed)


def _run_table(ctx, config, out, runner_name):
    cfg = _load_table_config(ctx, config)
    if cfg["experiment"] != runner_name:
        raise click.UsageError(
            f"config is for {cfg['experiment']!r}, expected {runner_name!r}")
    table = chains.run_experiment(cfg)
    path = _resolve(ctx, "out", out)
    if path:
        table.write(path)
    else:
        click.echo(table.to_csv_bytes().decode("utf-8"), nl=False)
    _emit({"metadata": table.metadata, "rows": len(table.rows),
           "all_passed": table.all_passed})
    _finish(table.all_passed)


@main.command()
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def sweep(ctx, config, out):
    """Bits-versus-accuracy Pareto sweep (CSV)."""
    _run_table(ctx, config, out, "bits-accuracy")


@main.command("chain-uniform")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def chain_uniform(ctx, config, out):
    """Uniform-setting entropy chain (CSV)."""
    _run_table(ctx, config, out, "uniform-chain")


@main.command("chain-expectation")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def chain_expectation(ctx, config, out):
    """Expectation-setting packing chain (CSV)."""
    _run_table(ctx, config, out, "expectation-chain")


if __name__ == "__main__":
    main()
