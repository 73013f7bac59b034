"""
Experiment procedures - run a configured scene with the proposed pipeline on or off

scaling on  = the configured reduction and stiffness bound
scaling off = the raw engine, both stages disabled
"""

import logging
import time
from typing import Tuple

import numpy as np
import pandas as pd

from ..lib.collision import incline_strips, pieces_from_settings, shape_from_settings
from ..lib.control import stability_margin
from ..lib.dynamics import BodyState, SimConfig, Trajectory, run
from ..lib.errors import InvalidParameterError
from ..lib.stiffness_qp import resolve_k_max
from ..models.schema import BodySettings, ExperimentReport, ForceReport, InsertionReport, SceneConfig
from .double_pin import build_double_pin, count_peg_contact_configs
from .flat_force import ForceEpisode, analyze_phases, build_flat_force, simulate_force_episode
from .incline import InclineScene, build_incline, sliding_acceleration
from .peg_insertion import InsertionRun, build_peg_insertion, insertion_rewards, run_insertion, segment_reports

logger = logging.getLogger(__name__)


def sim_config_for(config: SceneConfig, mass: float, scaling: bool, **overrides) -> SimConfig:
    if not scaling:
        overrides.setdefault("reduction", None)
        overrides.setdefault("stiffness_bound", None)
    return SimConfig.from_config(config, mass, **overrides)


def body_from_settings(body: BodySettings):
    shape = shape_from_settings(body.shape)
    state = BodyState(body.position, body.orientation, body.linear_velocity, body.angular_velocity,
                      body.mass, shape.inertia(body.mass))
    return shape, state


def _gravity_magnitude(sim: SimConfig) -> float:
    return float(np.linalg.norm(sim.gravity))


def incline_metrics(scene: InclineScene, trajectory: Trajectory, sim: SimConfig) -> dict:
    """
    Deviation from the analytic slide over the sliding phase

    The sliding phase ends when the analytic box front reaches the incline base.
    """
    g = _gravity_magnitude(sim)
    t_end = scene.slide_end_time(sim.mu_k, g)
    z0 = scene.initial.position[2]
    descent = float(z0 - scene.analytic_z(sim.mu_k, g, t_end))
    frame = trajectory.frame
    sliding = frame[frame["t"] <= t_end + 1e-12]
    if sliding.empty:
        return {"rms_dev_m": None, "total_descent_m": descent, "final_speed_ratio": None}
    deviation = sliding["pz"].to_numpy() - scene.analytic_z(sim.mu_k, g, sliding["t"].to_numpy())
    last = sliding.iloc[-1]
    speed = float(np.linalg.norm([last["vx"], last["vy"], last["vz"]]))
    analytic_speed = sliding_acceleration(scene.theta, sim.mu_k, g) * float(last["t"])
    return {
        "rms_dev_m": float(np.sqrt(np.mean(deviation ** 2))),
        "total_descent_m": descent,
        "final_speed_ratio": speed / analytic_speed if analytic_speed > 0.0 else None,
    }


def run_incline_experiment(config: SceneConfig, scaling: bool,
                           **sim_overrides) -> Tuple[ExperimentReport, Trajectory]:
    """Slide the box down the incline and score it against the analytic solution"""
    settings = config.scene
    scene = build_incline(settings)
    sim = sim_config_for(config, settings.box_mass, scaling, **sim_overrides)
    logger.info("incline experiment '%s': scaling %s, %d strips", config.name,
                "on" if scaling else "off", scene.strip_count)
    started = time.perf_counter()
    trajectory = run(scene.initial, scene.shape, scene.batch, sim)
    runtime = time.perf_counter() - started
    report = ExperimentReport(
        name=config.name,
        scaling=scaling,
        reached_ground=scene.reached_ground(trajectory) and not trajectory.diverged,
        diverged=trajectory.diverged,
        diverged_step=trajectory.diverged_step,
        divergence_reason=trajectory.divergence_reason,
        max_raw_contacts=trajectory.max_raw_contacts,
        max_net_stiffness=tuple(float(v) for v in trajectory.max_net_stiffness),
        runtime_s=runtime,
        config=config.model_dump(mode="json"),
        **incline_metrics(scene, trajectory, sim),
    )
    return report, trajectory


def run_custom_experiment(config: SceneConfig, scaling: bool,
                          **sim_overrides) -> Tuple[ExperimentReport, Trajectory]:
    """Run a body over user-supplied pieces (plus optional incline strips)"""
    settings = config.scene
    shape, initial = body_from_settings(settings.body)
    pieces = pieces_from_settings(settings.pieces)
    if settings.incline_strips is not None:
        first_id = max((p.id for p in pieces), default=-1) + 1
        pieces += incline_strips(settings.incline_strips, first_id)
    sim = sim_config_for(config, settings.body.mass, scaling, **sim_overrides)
    started = time.perf_counter()
    trajectory = run(initial, shape, pieces, sim)
    report = ExperimentReport(
        name=config.name,
        scaling=scaling,
        diverged=trajectory.diverged,
        diverged_step=trajectory.diverged_step,
        divergence_reason=trajectory.divergence_reason,
        max_raw_contacts=trajectory.max_raw_contacts,
        max_net_stiffness=tuple(float(v) for v in trajectory.max_net_stiffness),
        runtime_s=time.perf_counter() - started,
        config=config.model_dump(mode="json"),
    )
    return report, trajectory


def run_force_experiment(config: SceneConfig, scaling: bool) -> Tuple[ForceReport, ForceEpisode]:
    """Force-regulation episode on the flat scene, scored phase by phase"""
    settings = config.scene
    scene = build_flat_force(settings)
    stiffness = config.material.stiffness
    reduction = config.reduction_or_none if scaling else None
    k_max = resolve_k_max(config.bound_or_none, stiffness) if scaling else None
    started = time.perf_counter()
    episode = simulate_force_episode(scene, config.controller, stiffness, reduction, k_max)
    runtime = time.perf_counter() - started

    phases = analyze_phases(episode, settings.dt)
    net_stiffness = float(episode.net_stiffness.max()) if episode.net_stiffness.size else 0.0
    inner = config.controller.inner
    radius = stability_margin(net_stiffness, config.controller.kp_f, config.controller.ki_f,
                              inner.K, inner.D, settings.dt)
    report = ForceReport(
        name=config.name,
        scaling=scaling,
        contact_count=int(episode.contact_counts.max()) if episode.contact_counts.size else 0,
        net_stiffness=net_stiffness,
        spectral_radius=radius,
        phases=phases,
        settled=bool(phases) and all(p.settled for p in phases),
        unstable=any(p.unstable for p in phases),
        diverged=episode.diverged,
        runtime_s=runtime,
        config=config.model_dump(mode="json"),
    )
    logger.info("force experiment '%s': K_e=%.0f N/m radius=%.6f settled=%s unstable=%s",
                config.name, net_stiffness, radius, report.settled, report.unstable)
    return report, episode


def run_insertion_experiment(config: SceneConfig, scaling: bool,
                             **sim_overrides) -> Tuple[InsertionReport, InsertionRun]:
    """Drive the peg through its motion script and report contacts, timings and reward"""
    settings = config.scene
    scene = build_peg_insertion(settings)
    sim = sim_config_for(config, settings.peg_mass, scaling, **sim_overrides)
    started = time.perf_counter()
    result = run_insertion(scene, sim)
    runtime = time.perf_counter() - started
    rewards = insertion_rewards(scene, result)
    over = np.any(np.abs(result.wrenches) > np.asarray(settings.wrench_limit), axis=1)
    trajectory = result.trajectory
    report = InsertionReport(
        name=config.name,
        scaling=scaling,
        steps=trajectory.steps,
        mean_raw_contacts=float(result.raw_contacts.mean()),
        mean_applied_contacts=float(result.applied_contacts.mean()),
        max_raw_contacts=trajectory.max_raw_contacts,
        max_net_stiffness=tuple(float(v) for v in trajectory.max_net_stiffness),
        mean_phase_us=trajectory.mean_phase_us(),
        segments=segment_reports(scene, result),
        final_reward=float(rewards[-1]),
        force_limit_steps=int(over.sum()),
        runtime_s=runtime,
        config=config.model_dump(mode="json"),
    )
    logger.info("insertion experiment '%s': scaling %s, %.1f raw / %.1f applied contacts per step",
                config.name, "on" if scaling else "off", report.mean_raw_contacts, report.mean_applied_contacts)
    return report, result


def run_contact_configs(config: SceneConfig) -> dict:
    scene = build_double_pin(config.scene)
    counts = count_peg_contact_configs(scene)
    return {"name": config.name, "counts": counts, "max_contacts": max(counts.values())}


def compare_trajectories(a: Trajectory, b: Trajectory) -> float:
    """RMS difference of box-centre z over the common time window, b interpolated onto a"""
    fa, fb = a.frame, b.frame
    if fa.empty or fb.empty:
        raise InvalidParameterError("cannot compare empty trajectories")
    end = min(fa["t"].iloc[-1], fb["t"].iloc[-1])
    window = fa[fa["t"] <= end]
    other = np.interp(window["t"].to_numpy(), fb["t"].to_numpy(), fb["pz"].to_numpy())
    return float(np.sqrt(np.mean((window["pz"].to_numpy() - other) ** 2)))


def episode_frame(episode: ForceEpisode) -> pd.DataFrame:
    return pd.DataFrame(episode.to_columns())
