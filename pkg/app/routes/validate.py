"""
Validate Routes - acceptance suites
"""

import click
import pandas as pd

from ..controllers.validate_controller import SUITES, validate_suite
from .common import EXIT_FAILED, global_seed, guarded


@click.command("validate")
@click.argument("suite", type=click.Choice(sorted(SUITES)))
@click.option("--fast", is_flag=True, help="Shortened scenes for a smoke run")
@click.option("--config-dir", default=None, help="Directory holding the shipped scene configs")
@click.pass_context
@guarded
def validate(ctx, suite, fast, config_dir):
    """Run SUITE and print pass/fail per criterion; exit 0 only if all pass"""
    rows = validate_suite(suite, fast=fast, config_dir=config_dir, seed=global_seed(ctx))
    table = pd.DataFrame(rows)[["criterion", "value", "passed"]]
    click.echo(table.to_string(index=False))
    if not table["passed"].all():
        raise SystemExit(EXIT_FAILED)
