"""Command-line interface.

The group-level flags select the config file and override its ``seed`` and
``out`` keys; every other parameter comes from the per-command key=value
config.  ``--threads`` caps the linear-algebra thread pools and defaults to
1 so repeated runs are byte-identical; it takes effect before the numeric
modules are imported, which is why this module imports its command
implementations lazily.

Usage errors (bad flags, bad config, malformed files) print a single
``error: ...`` line on stderr and exit with status 2.
"""

from __future__ import annotations

import os
import sys

import click

from .config import load_config, resolve
from .errors import FvcError

_THREAD_VARS = (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def _apply_threads(n: int) -> None:
    for var in _THREAD_VARS:
        os.environ[var] = str(n)


def _scan_threads(args) -> int:
    value = None
    for i, arg in enumerate(args):
        if arg == "--threads" and i + 1 < len(args):
            value = args[i + 1]
        elif arg.startswith("--threads="):
            value = arg.split("=", 1)[1]
    try:
        n = int(value) if value is not None else 1
    except ValueError:
        return 1
    return max(n, 1)


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


@click.group()
@click.option("--config", "config_path", type=str, default=None,
              help="Path to a key=value config file for the subcommand.")
@click.option("--seed", type=int, default=None,
              help="Override the config seed.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Cap the linear-algebra thread pools.")
@click.option("--out", "out_path", type=str, default=None,
              help="Override the config output path.")
@click.pass_context
def cli(ctx, config_path, seed, threads, out_path):
    """Feature-encoding toolkit: synthetic data, model training, encoding,
    classification, and benchmarks."""
    ctx.obj = {"config": config_path, "seed": seed, "out": out_path}


def _dispatch(ctx, command: str) -> None:
    from . import commands

    obj = ctx.obj or {}
    try:
        raw = load_config(obj["config"]) if obj.get("config") else {}
        cfg = resolve(
            commands.SCHEMAS[command], raw,
            {"seed": obj.get("seed"), "out": obj.get("out")}, command,
        )
        commands.RUNNERS[command](cfg)
    except FvcError as exc:
        _fail(str(exc))
    except FileNotFoundError as exc:
        _fail(f"file not found: {exc.filename}")
    except (NotADirectoryError, IsADirectoryError, PermissionError) as exc:
        _fail(str(exc))


def _register(name: str, doc: str) -> None:
    @cli.command(name, help=doc)
    @click.pass_context
    def _cmd(ctx):
        _dispatch(ctx, name)


_register("synth", "Generate a labeled synthetic feature-file corpus.")
_register("train-dict", "Learn a pursuit dictionary from feature files.")
_register("train-hybrid-dict",
          "Learn the discriminative/residual dictionary pair from feature "
          "files and a trained supervised coder.")
_register("train-gmm", "Fit a diagonal Gaussian mixture to feature files.")
_register("train-supcoder",
          "Train the supervised coder on labeled feature files.")
_register("encode", "Encode feature files into image signatures.")
_register("classify", "Train the linear classifier on labeled signatures.")
_register("evaluate", "Score a trained classifier on labeled signatures.")
_register("bench-resolution",
          "Compare mixture and dictionary resolution across dimensions.")


def main(argv=None) -> None:
    args = sys.argv[1:] if argv is None else list(argv)
    _apply_threads(_scan_threads(args))
    cli.main(args=args, prog_name="fvcoding")


if __name__ == "__main__":
    main()
