"""
Simulate Routes - run one scene config
"""

import json

import click

from ..controllers.simulate_controller import simulate_file
from .common import global_out_dir, global_seed, guarded, overrides_option


@click.command("simulate")
@click.argument("config_path", type=click.Path(dir_okay=False))
@overrides_option
@click.option("--out-dir", default=None, help="Artifact directory (default: config output.out_dir)")
@click.pass_context
@guarded
def simulate(ctx, config_path, overrides, out_dir):
    """
    Run the scene in CONFIG_PATH and write its trajectory CSV and JSON report

    A diverged run still exits 0: divergence is recorded in the report.
    """
    result = simulate_file(config_path, overrides, global_out_dir(ctx, out_dir), seed=global_seed(ctx))
    click.echo(json.dumps(result["report"] if result["kind"] == "double_pin_count" else
                          {k: result["report"].get(k) for k in
                           ("name", "scaling", "rms_dev_m", "reached_ground", "settled", "diverged",
                            "mean_raw_contacts", "mean_applied_contacts", "runtime_s")},
                          indent=2))
    click.echo(f"report: {result['report_path']}")
    if result.get("trajectory_csv"):
        click.echo(f"trajectory: {result['trajectory_csv']}")
