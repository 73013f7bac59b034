"""
Shared CLI plumbing - exit codes and error reporting for every command
"""

import functools
import logging

import click
from pydantic import ValidationError

from ..lib.errors import ContactSenseError, ConfigError, InvalidParameterError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3

overrides_option = click.option(
    "--set", "overrides", multiple=True, metavar="KEY.PATH=VALUE",
    help="Override a config value (value parsed as JSON, else string). Repeatable.",
)


def guarded(command):
    """Map package errors to exit codes: config 2, IO 3, anything else from the package 1"""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (ConfigError, InvalidParameterError, ValidationError) as e:
            click.echo(f"error: {e}", err=True)
            raise SystemExit(EXIT_CONFIG)
        except OSError as e:
            name = getattr(e, "filename", None)
            click.echo(f"error: {name + ': ' if name else ''}{e.strerror or e}", err=True)
            raise SystemExit(EXIT_IO)
        except ContactSenseError as e:
            logger.exception("command failed")
            click.echo(f"error: {e}", err=True)
            raise SystemExit(EXIT_FAILED)

    return wrapper


def global_out_dir(ctx: click.Context, local=None):
    """Command-level --out-dir wins over the group-level one"""
    if local is not None:
        return local
    return (ctx.obj or {}).get("out_dir")


def global_seed(ctx: click.Context):
    return (ctx.obj or {}).get("seed")
