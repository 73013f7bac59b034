"""
Reduce Routes - reduce and bound a stored contact set
"""

import json
from pathlib import Path

import click

from ..controllers.reduce_controller import reduce_file
from .common import global_out_dir, guarded


@click.command("reduce")
@click.argument("input_path", type=click.Path(dir_okay=False))
@click.option("-o", "--output", "output_path", default=None, help="Output ContactSet file")
@click.option("-k", "--k", "k", type=click.IntRange(min=1), default=10, show_default=True, help="Cluster count")
@click.option("-c", "--c", "c", type=click.FloatRange(min=0.0), default=None,
              help="Position weight of the clustering metric (default 1/L^2 of the bounding box)")
@click.option("--k-max", type=click.FloatRange(min=0.0, min_open=True), default=None, help="Absolute bound [N/m]")
@click.option("--factor", type=click.FloatRange(min=0.0, min_open=True), default=None,
              help="Bound as a multiple of the contact stiffness (default 2)")
@click.pass_context
@guarded
def reduce(ctx, input_path, output_path, k, c, k_max, factor):
    """Cluster INPUT_PATH to at most K contacts and bound their net stiffness"""
    if output_path is None:
        directory = Path(global_out_dir(ctx) or ".")
        output_path = str(directory / (Path(input_path).stem + ".reduced.json"))
    diagnostics = reduce_file(input_path, output_path, k, c, k_max, factor)
    click.echo(json.dumps(diagnostics, indent=2))
