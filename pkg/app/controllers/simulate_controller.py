"""
Simulate Controller - runs one configured scene and writes its artifacts
"""

import json
import logging
from pathlib import Path
from typing import Dict, Optional, Sequence

from ..models.schema import SceneConfig
from ..services.experiments import (episode_frame, run_contact_configs, run_custom_experiment,
                                    run_force_experiment, run_incline_experiment, run_insertion_experiment)
from ..utils.artifacts import atomic_write_text, write_frame_csv, write_report
from ..utils.config_loader import load_scene_config

logger = logging.getLogger(__name__)


def pipeline_enabled(config: SceneConfig) -> bool:
    return config.reduction_or_none is not None or config.bound_or_none is not None


def output_dir(config: SceneConfig, out_dir: Optional[str]) -> Path:
    return Path(out_dir if out_dir is not None else config.output.out_dir)


def simulate_scene(config: SceneConfig, out_dir: Optional[str] = None, seed: Optional[int] = None) -> Dict:
    """
    Controller to run the scene of a validated config as configured

    Args:
        config: validated scene config (overrides already applied)
        out_dir: artifact directory; defaults to config.output.out_dir
        seed: copied into the report; no stage draws random numbers

    Returns:
        Dictionary with the report and the paths written
    """
    directory = output_dir(config, out_dir)
    scaling = pipeline_enabled(config)
    kind = config.scene.kind
    report_path = directory / f"{config.name}.report.json"

    if kind == "double_pin_count":
        result = {**run_contact_configs(config), "seed": seed}
        atomic_write_text(report_path, json.dumps(result, indent=2))
        return {"kind": kind, "report": result, "report_path": str(report_path)}

    csv_path = directory / f"{config.name}.csv"
    if kind == "flat_force":
        report, episode = run_force_experiment(config, scaling)
        if config.output.trajectory_csv:
            write_frame_csv(episode_frame(episode), csv_path)
    elif kind == "peg_insertion":
        report, insertion = run_insertion_experiment(config, scaling)
        if config.output.trajectory_csv:
            insertion.trajectory.write_csv(csv_path)
    else:
        runner = run_incline_experiment if kind == "incline" else run_custom_experiment
        report, trajectory = runner(config, scaling)
        if config.output.trajectory_csv:
            trajectory.write_csv(csv_path)

    update = {"seed": seed}
    if config.output.trajectory_csv:
        update["trajectory_csv"] = str(csv_path)
    report = report.model_copy(update=update)
    write_report(report, report_path)
    logger.info("simulate '%s' done: report %s", config.name, report_path)
    return {"kind": kind, "report": report.model_dump(mode="json"), "report_path": str(report_path),
            "trajectory_csv": report.trajectory_csv}


def simulate_file(config_path: str, overrides: Sequence[str] = (), out_dir: Optional[str] = None,
                  seed: Optional[int] = None) -> Dict:
    """Load `config_path` with overrides and run it"""
    return simulate_scene(load_scene_config(config_path, overrides), out_dir, seed)
