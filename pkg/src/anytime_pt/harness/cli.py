"""Command-line entry point: ``anytime-pt run | list-presets | report``."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from ..exceptions import ConfigError, RunAborted
from .config import load_config
from .presets import get_preset, list_presets
from .runner import report_from_dir, run_experiment

EXIT_CONFIG = 2
EXIT_ABORT = 3


def _resolve(target: str):
    path = Path(target)
    if path.suffix == ".toml" or path.is_file():
        if not path.is_file():
            raise ConfigError(f"config file {target!r} does not exist")
        return load_config(path), path.stem
    return get_preset(target), target


def _fail(code, err):
    lines = err.errors if isinstance(err, ConfigError) else [str(err)]
    for line in lines:
        click.echo(f"error: {line}", err=True)
    sys.exit(code)


def _summary(report: dict) -> list:
    lines = []
    diag = report.get("diagnostics")
    if diag:
        for p in diag["parameters"]:
            lines.append(f"{p['name']}\tn={p['n']}\tiat={p['iat']:.4g}\tess={p['ess']:.4g}")
    density = report.get("density", {})
    for key in ("tv_target", "tv_anytime", "second_component_mass"):
        if key in density:
            lines.append(f"{key}\t{density[key]:.4g}")
    for c in density.get("chains", []) if isinstance(density.get("chains"), list) else []:
        lines.append(f"chain {c['chain']}\teps={c['eps']:.4g}\ttv={c['tv']:.4g}"
                     f"\tpeak={c['peak']:.4g}\treference_peak={c['reference_peak']:.4g}")
    if "timeline" in report:
        lines.append(f"idle\t{report['timeline']['idle']:.6g}")
    return lines


@click.group()
def main():
    """Anytime parallel tempering experiments."""


@main.command()
@click.argument("target")
@click.option("--seed", type=int, default=None, help="Root seed (default: from config).")
@click.option("--out", "out", type=click.Path(file_okay=False), default=None,
              help="Output directory (default: runs/<target>-seed<seed>).")
@click.option("--budget", type=float, default=None,
              help="Run length T: seconds in wall-clock mode, time units in virtual mode.")
@click.option("--uncorrected", is_flag=True, help="Allow working chains to be exchanged.")
@click.option("--worst-case", is_flag=True, help="Never run local moves on cold chains.")
def run(target, seed, out, budget, uncorrected, worst_case):
    """Run a preset name or a TOML config file."""
    try:
        cfg, name = _resolve(target)
        changes = {}
        if seed is not None:
            changes["seed"] = seed
        if budget is not None:
            changes["budget"] = budget
            if cfg.burn_in >= budget:
                changes["burn_in"] = 0.0
                click.echo(f"note: burn-in {cfg.burn_in} >= budget, set to 0", err=True)
        if uncorrected:
            changes["corrected"] = False
        if worst_case:
            changes["worst_case"] = True
        cfg = cfg.with_(**changes) if changes else cfg
        out = out or cfg.out_dir or f"runs/{name}-seed{cfg.seed}"
        result = run_experiment(cfg, out_dir=out)
    except ConfigError as err:
        _fail(EXIT_CONFIG, err)
    except RunAborted as err:
        _fail(EXIT_ABORT, err)
    for line in _summary(result.report):
        click.echo(line)
    click.echo(f"output\t{result.out_dir}")


@main.command("list-presets")
def list_presets_cmd():
    """List bundled presets, one per line: name, tab, description."""
    for name, description in list_presets():
        click.echo(f"{name}\t{description}")


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
def report(run_dir):
    """Recompute the report of a finished run directory and print it as JSON."""
    try:
        rep = report_from_dir(run_dir)
    except (ConfigError, FileNotFoundError) as err:
        _fail(EXIT_CONFIG, err)
    click.echo(json.dumps(rep, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
