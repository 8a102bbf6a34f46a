"""Command-line entry point: `steady <scenario> --config <path> [...]`.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .dataio import ConfigError
from .estimation import FitDivergedError
from .linalg import EigensolverError, LinalgError
from .models import IntegrationError
from .scenarios import SCENARIOS, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.argument("scenario", type=click.Choice(sorted(SCENARIOS)))
@click.option("--config", "config_path", required=True, help="JSON config file.")
@click.option("--out", "out_dir", default=None, help="Output directory (default out_<scenario>).")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--threads", type=int, default=None,
              help="Worker threads (falls back to $STEADY_THREADS, then 1).")
def main(scenario, config_path, out_dir, seed, threads):
    """Run one scripted scenario and write its CSV/JSON artifacts."""
    if threads is None:
        env = os.environ.get("STEADY_THREADS", "")
        if env:
            try:
                threads = int(env)
            except ValueError:
                click.echo(f"error: STEADY_THREADS={env!r} is not an integer", err=True)
                sys.exit(EXIT_CONFIG)
    try:
        config = _load_config(config_path)
        out = run_scenario(
            scenario,
            config,
            out_dir or f"out_{scenario}",
            seed=seed,
            threads=threads,
        )
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (
        FitDivergedError,
        IntegrationError,
        EigensolverError,
        LinalgError,
        FloatingPointError,
        np.linalg.LinAlgError,
    ) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    click.echo(f"wrote artifacts to {out}")
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
