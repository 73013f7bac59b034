"""
Bench Controller - per-phase timing of the raw engine against the proposed pipeline
"""

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd
from tqdm import tqdm

from ..lib.dynamics import Trajectory
from ..lib.errors import ConfigError
from ..models.schema import SceneConfig
from ..services.experiments import run_custom_experiment, run_incline_experiment, run_insertion_experiment
from ..utils.artifacts import atomic_write_text, write_frame_csv
from ..utils.config_loader import load_scene_config

logger = logging.getLogger(__name__)

VARIANTS = ("baseline", "proposed")
STATE_COLUMNS = ["px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "wx", "wy", "wz"]
OVERHEAD_SHARE = 0.2
BENCH_KINDS = ("incline", "custom", "peg_insertion")


def trajectory_digest(trajectory: Trajectory) -> str:
    """Hash of the recorded states; timing columns are left out"""
    states = trajectory.frame[STATE_COLUMNS].to_numpy()
    return hashlib.sha256(states.tobytes()).hexdigest()[:16]


def _run_trajectory(config: SceneConfig, scaling: bool) -> Trajectory:
    kind = config.scene.kind
    if kind == "peg_insertion":
        return run_insertion_experiment(config, scaling)[1].trajectory
    runner = run_incline_experiment if kind == "incline" else run_custom_experiment
    return runner(config, scaling)[1]


def _bench_repeat(task: Tuple[Dict, str, int]) -> Dict:
    document, variant, repeat = task
    config = SceneConfig.model_validate(document)
    trajectory = _run_trajectory(config, scaling=variant == "proposed")
    means = trajectory.mean_phase_us()
    return {
        "variant": variant,
        "repeat": repeat,
        "steps": trajectory.steps,
        "mean_raw_contacts": float(trajectory.frame["n_raw"].mean()) if not trajectory.frame.empty else 0.0,
        "mean_applied_contacts": float(trajectory.frame["n_reduced"].mean()) if not trajectory.frame.empty else 0.0,
        "collide_ms": means["t_collide_us"] / 1000.0,
        "reduce_qp_ms": (means["t_reduce_us"] + means["t_qp_us"]) / 1000.0,
        "response_ms": means["t_response_us"] / 1000.0,
        "diverged": trajectory.diverged,
        "digest": trajectory_digest(trajectory),
    }


def summarize(rows: pd.DataFrame) -> pd.DataFrame:
    """Mean timings per variant, baseline first"""
    table = rows.groupby("variant", sort=False).agg(
        repeats=("repeat", "count"),
        mean_raw_contacts=("mean_raw_contacts", "mean"),
        mean_applied_contacts=("mean_applied_contacts", "mean"),
        collide_ms=("collide_ms", "mean"),
        reduce_qp_ms=("reduce_qp_ms", "mean"),
        response_ms=("response_ms", "mean"),
        deterministic=("digest", lambda d: d.nunique() == 1),
    )
    return table.reindex([v for v in VARIANTS if v in table.index])


def speed_checks(table: pd.DataFrame) -> Dict[str, bool]:
    baseline, proposed = table.loc["baseline"], table.loc["proposed"]
    savings = baseline["response_ms"] - proposed["response_ms"]
    return {
        "response_faster": bool(proposed["response_ms"] < baseline["response_ms"]),
        "overhead_small": bool(savings > 0.0 and proposed["reduce_qp_ms"] < OVERHEAD_SHARE * savings),
        "deterministic": bool(table["deterministic"].all()),
    }


def bench_config(config: SceneConfig, repeats: int = 3, workers: int = 1,
                 out_dir: Optional[str] = None, progress: bool = True, seed: Optional[int] = None) -> Dict:
    """
    Controller to benchmark a scene

    Args:
        config: incline, custom or peg_insertion scene config
        repeats: runs per variant
        workers: process pool size; 1 runs in-process
        out_dir: where bench CSV and summary go; None writes nothing
        seed: recorded in the summary; every run is deterministic

    Returns:
        Dictionary with the per-repeat rows, the summary table and the speed checks
    """
    if config.scene.kind not in BENCH_KINDS:
        raise ConfigError(f"bench supports {', '.join(BENCH_KINDS)} scenes, not '{config.scene.kind}'", "scene.kind")
    if repeats < 1 or workers < 1:
        raise ConfigError("repeats and workers must be >= 1")
    document = config.model_dump(mode="json")
    tasks = [(document, variant, r) for variant in VARIANTS for r in range(repeats)]

    results: List[Dict] = []
    if workers == 1:
        for task in tqdm(tasks, desc="bench", disable=not progress):
            results.append(_bench_repeat(task))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for row in tqdm(pool.map(_bench_repeat, tasks), total=len(tasks), desc="bench", disable=not progress):
                results.append(row)

    rows = pd.DataFrame(results)
    table = summarize(rows)
    checks = speed_checks(table)
    logger.info("bench '%s': %s", config.name, checks)
    result = {"name": config.name, "seed": seed, "rows": rows, "table": table, "checks": checks}
    if out_dir is not None:
        directory = Path(out_dir)
        write_frame_csv(rows, directory / f"{config.name}.bench.csv")
        summary = {"name": config.name, "seed": seed, "checks": checks,
                   "table": json.loads(table.reset_index().to_json(orient="records"))}
        atomic_write_text(directory / f"{config.name}.bench.json", json.dumps(summary, indent=2))
    return result


def bench_file(config_path: str, overrides: Sequence[str] = (), repeats: int = 3, workers: int = 1,
               out_dir: Optional[str] = None, seed: Optional[int] = None) -> Dict:
    config = load_scene_config(config_path, overrides)
    return bench_config(config, repeats, workers, out_dir if out_dir is not None else config.output.out_dir,
                        seed=seed)
