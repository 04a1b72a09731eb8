"""Command-line front end.

Exit codes: 0 success, 1 config error, 2 data error, 3 provider error,
4 degenerate-math error.
"""

from __future__ import annotations

import functools
import json
import sys

import click

from . import pipeline
from .config import load_pipeline_config
from .errors import KeywatchError
from .metrics import format_summary


@click.group()
def main() -> None:
    """Keyword-weighted frame-description anomaly detection pipeline."""


def _common_options(fn):
    fn = click.option("--config", "config_path", required=True, help="Pipeline config file")(fn)
    fn = click.option("--seed", type=int, default=None, help="Override all seeds")(fn)
    fn = click.option("--output-dir", default=None, help="Override the output directory")(fn)
    fn = click.option("--threshold", type=float, default=None, help="Decision threshold")(fn)
    fn = click.option("--provider-url", default=None, help="Override the provider endpoint")(fn)
    fn = click.option("--stub", "stub_map", default=None, help="JSON file mapping frame_id to text")(fn)
    return fn


def _command(fn):
    """Load config, run the stage, and translate errors to exit codes."""

    @functools.wraps(fn)
    def wrapper(config_path, seed, output_dir, threshold, provider_url, stub_map, **kwargs):
        try:
            cfg = load_pipeline_config(
                config_path,
                seed=seed,
                output_dir=output_dir,
                threshold=threshold,
                provider_url=provider_url,
                stub_map=stub_map,
            )
            fn(cfg, **kwargs)
        except KeywatchError as exc:
            where = f" [{exc.stage}]" if exc.stage else ""
            click.echo(f"error{where}: {type(exc).__name__}: {exc}", err=True)
            sys.exit(exc.exit_code)

    return wrapper


@main.command()
@_common_options
@_command
def induce(cfg) -> None:
    """Sample frames, derive keyword weights, and write the splits."""
    path = pipeline.run_induce(cfg)
    click.echo(f"keyword model written to {path}")


@main.command()
@_common_options
@_command
def train(cfg) -> None:
    """Train the classifier on the train split."""
    path = pipeline.run_train(cfg)
    click.echo(f"classifier written to {path}")


@main.command()
@click.argument("frame_ref")
@_common_options
@_command
def infer(cfg, frame_ref: str) -> None:
    """Score one frame (by manifest id or image path)."""
    payload = pipeline.run_infer(cfg, frame_ref)
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


@main.command(name="eval")
@_common_options
@_command
def eval_cmd(cfg) -> None:
    """Evaluate the trained classifier on the test split."""
    report = pipeline.run_eval(cfg)
    click.echo(format_summary(report))


@main.command()
@_common_options
@_command
def describe(cfg) -> None:
    """Warm the description cache for every manifest frame."""
    summary = pipeline.run_describe(cfg)
    click.echo(f"described {summary['described']} frames")
    for frame_id, message in summary["failed"]:
        click.echo(f"failed {frame_id}: {message}", err=True)


if __name__ == "__main__":
    main()
