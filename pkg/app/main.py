import logging

import click

from .routes.bench import bench
from .routes.reduce import reduce
from .routes.simulate import simulate
from .routes.validate import validate

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
@click.option("--quiet", is_flag=True, help="Warnings and errors only")
@click.option("--out-dir", default=None, help="Artifact directory for every command")
@click.option("--seed", type=int, default=None, help="Recorded in every report; draws the qp-oracle problems")
@click.version_option("1.0.0", prog_name="contact-sense")
@click.pass_context
def cli(ctx, verbose, quiet, out_dir, seed):
    """Penalty-contact simulation with contact reduction and bounded stiffness"""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    ctx.ensure_object(dict)
    ctx.obj.update(out_dir=out_dir, seed=seed)


# Register commands
cli.add_command(simulate)
cli.add_command(reduce)
cli.add_command(bench)
cli.add_command(validate)


if __name__ == "__main__":
    cli()
