"""
Bench Routes - timing table of baseline vs proposed pipeline
"""

import click

from ..controllers.bench_controller import bench_file
from .common import EXIT_FAILED, global_out_dir, global_seed, guarded, overrides_option


@click.command("bench")
@click.argument("config_path", type=click.Path(dir_okay=False))
@overrides_option
@click.option("--repeats", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True,
              help="Run repeats in this many worker processes")
@click.option("--strict", is_flag=True, help="Exit 1 when a speed check fails")
@click.pass_context
@guarded
def bench(ctx, config_path, overrides, repeats, workers, strict):
    """Mean per-step collision, reduction+QP and response times for CONFIG_PATH"""
    result = bench_file(config_path, overrides, repeats, workers, global_out_dir(ctx), seed=global_seed(ctx))
    click.echo(result["table"].to_string(float_format=lambda v: f"{v:.4f}"))
    for name, passed in result["checks"].items():
        click.echo(f"{'PASS' if passed else 'FAIL'}  {name}")
    if strict and not all(result["checks"].values()):
        raise SystemExit(EXIT_FAILED)
