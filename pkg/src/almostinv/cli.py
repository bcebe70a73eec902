"""Command line entry point: ``almostinv run`` and ``almostinv zoo list``."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import zoo
from .errors import ConfigInvalid
from .scenario import apply_overrides, bundled_scenarios, load_config, run_scenario, write_report


@click.group()
def main():
    """Almost-invariant half-space constructions at desk scale."""


@main.command()
@click.option("--config", "config", required=True,
              help="Scenario TOML file, or the name of a bundled scenario.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the JSON report here (stdout if omitted).")
@click.option("--dim", type=int, default=None, help="Override the truncation dimension.")
@click.option("--eps", type=float, default=None, help="Override the norm budget.")
@click.option("--tol-override", "tol_overrides", multiple=True, metavar="KEY=VAL",
              help="Override one tolerance; repeatable.")
@click.option("--seed", type=int, default=None, help="Override the random seed.")
def run(config, out, dim, eps, tol_overrides, seed):
    """Run one scenario; exit status 0 iff every residual is within tolerance."""
    path = Path(config)
    if not path.exists():
        bundled = bundled_scenarios()
        if config not in bundled:
            raise click.UsageError(f"no such file or bundled scenario: {config}")
        path = bundled[config]
    try:
        cfg = apply_overrides(load_config(path), dim, eps, tol_overrides, seed)
    except ConfigInvalid as e:
        for field, msg in sorted(e.errors.items()):
            click.echo(f"config error: {field}: {msg}", err=True)
        sys.exit(2)
    report = run_scenario(cfg)
    if out:
        write_report(report, out)
    else:
        click.echo(json.dumps(report, indent=2, sort_keys=True))
    status = "PASS" if report["pass"] else "FAIL"
    click.echo(f"{cfg.name}: {status}", err=True)
    sys.exit(0 if report["pass"] else 1)


@main.group("zoo")
def zoo_group():
    """Operator catalogue."""


@zoo_group.command("list")
@click.argument("filter_text", required=False, default="")
def zoo_list_cmd(filter_text):
    """List catalogue entries, optionally filtered by a substring."""
    for e in zoo.zoo_list(filter_text):
        click.echo(f"{e.name:28s} {e.tag:14s} {e.facts}")


@main.command("scenarios")
def scenarios_cmd():
    """List the bundled scenarios."""
    for name in bundled_scenarios():
        click.echo(name)


if __name__ == "__main__":
    main()
