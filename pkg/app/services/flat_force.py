"""
Flat force scene - a tilted peg pressed onto a decomposed hole surface

A cylinder peg, tilted one degree about x, is pressed straight down onto
square columns placed under a chosen subset of its lower rim samples, so
the scene generates exactly 4 or 6 contacts once the peg is seated. The
peg is driven along the surface normal by a single computed-torque joint
whose set point comes from the parallel position/force controller.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from ..lib.collision import (CylinderShape, ConvexPiece, PieceBatch, Pose, box_piece,
                             generate_contacts, local_samples)
from ..lib.control import JointPlant, ParallelController, computed_torque_plant_step, parallel_step
from ..lib.dynamics import contact_force
from ..lib.errors import InvalidParameterError
from ..lib.reducer import reduce
from ..lib.stiffness_qp import scale_contacts
from ..models.schema import ControllerSettings, FlatForceSceneSettings, ForcePhaseReport, ReductionConfig

logger = logging.getLogger(__name__)

# rim indices (out of 8) carrying a column
RIM_LAYOUTS = {4: (0, 2, 4, 6), 6: (0, 1, 2, 4, 5, 6)}
COLUMN_HALF_WIDTH = 0.002
COLUMN_DEPTH = 0.03
SETTLE_BAND = 0.1
SETTLE_HOLD = 0.5
GROWTH_RATIO = 0.8
Z_AXIS = 2


@dataclass(frozen=True, eq=False)
class FlatForceScene:
    settings: FlatForceSceneSettings
    shape: CylinderShape
    pieces: List[ConvexPiece]
    batch: PieceBatch
    rotation: Rotation
    start_z: float

    def pose(self, press_depth: float) -> Pose:
        """Peg pose after pressing `press_depth` metres along -z from the start"""
        return Pose.from_rotation((0.0, 0.0, self.start_z - press_depth), self.rotation)


def rim_layout(contact_count: int, rim_samples: int) -> Tuple[int, ...]:
    if contact_count not in RIM_LAYOUTS:
        raise InvalidParameterError(f"flat force scene supports 4 or 6 contacts, got {contact_count}")
    step = rim_samples / 8.0
    return tuple(int(round(i * step)) for i in RIM_LAYOUTS[contact_count])


def build_flat_force(settings: FlatForceSceneSettings) -> FlatForceScene:
    shape = CylinderShape(settings.peg_radius, settings.peg_half_height, settings.rim_samples)
    rotation = Rotation.from_euler("x", settings.tilt_deg, degrees=True)
    rim = rotation.apply(local_samples(shape)[:settings.rim_samples])
    chosen = rim_layout(settings.contact_count, settings.rim_samples)
    # lowest chosen rim point starts initial_gap above the surface z = 0
    start_z = settings.initial_gap - float(rim[list(chosen), 2].min())
    w = COLUMN_HALF_WIDTH
    pieces = [
        box_piece(piece_id, (rim[i, 0] - w, rim[i, 1] - w, -COLUMN_DEPTH), (rim[i, 0] + w, rim[i, 1] + w, 0.0),
                  contact_faces=("+z",))
        for piece_id, i in enumerate(chosen)
    ]
    return FlatForceScene(settings, shape, pieces, PieceBatch(pieces), rotation, start_z)


def force_schedule(settings: FlatForceSceneSettings) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    """Desired force per step and the (start, stop) step range of every phase"""
    desired, ranges, start = [], [], 0
    for phase in settings.phases:
        steps = int(round(phase.duration / settings.dt))
        desired.append(np.full(steps, phase.force))
        ranges.append((start, start + steps))
        start += steps
    return np.concatenate(desired), ranges


@dataclass(frozen=True, eq=False)
class ForceEpisode:
    times: np.ndarray
    forces: np.ndarray
    desired: np.ndarray
    press_depth: np.ndarray
    contact_counts: np.ndarray
    net_stiffness: np.ndarray
    phase_ranges: List[Tuple[int, int]]
    diverged: bool = False

    def to_columns(self) -> Dict[str, np.ndarray]:
        return {"t": self.times, "f": self.forces, "f_d": self.desired, "q": self.press_depth,
                "n_contacts": self.contact_counts, "ke_zz": self.net_stiffness}


def simulate_force_episode(scene: FlatForceScene, controller: ControllerSettings, stiffness: float,
                           reduction: Optional[ReductionConfig] = None,
                           k_max: Optional[float] = None) -> ForceEpisode:
    """
    Run the force-regulation episode of the scene's phase schedule

    Each control period measures the contact force at the current peg pose,
    advances the parallel controller (zero feedforward velocity) and steps
    the inner joint with the contact force fed forward as external torque.
    """
    settings = scene.settings
    dt = settings.dt
    desired, ranges = force_schedule(settings)
    inner = controller.inner
    plant = JointPlant.single(inner.K, inner.D, inner.M, dt)
    ctrl = ParallelController.create(controller.kp_f, controller.ki_f, controller.f_limit, controller.force_axes)

    steps = desired.shape[0]
    forces = np.zeros(steps)
    depths = np.zeros(steps)
    counts = np.zeros(steps, dtype=int)
    stiffness_zz = np.zeros(steps)
    f_d = np.zeros(6)
    f_meas = np.zeros(6)
    v_d = np.zeros(6)
    diverged = False
    for i in range(steps):
        q, qd = float(plant.q[0]), float(plant.qd[0])
        contacts = generate_contacts(scene.shape, scene.pose(q), scene.batch, stiffness, 0.0)
        if reduction is not None and len(contacts):
            contacts = reduce(contacts, reduction)
        if k_max is not None and len(contacts):
            contacts, _ = scale_contacts(contacts, k_max)
        velocity = np.array([0.0, 0.0, -qd])
        f = 0.0
        for point in contacts:
            f += contact_force(point, contacts.stiffness, contacts.damping, velocity, 0.0, 0.0, 1e-3)[2]
        forces[i] = f
        depths[i] = q
        counts[i] = len(contacts)
        if len(contacts):
            stiffness_zz[i] = contacts.stiffness * float(contacts.scales @ contacts.normals[:, 2] ** 2)

        f_d[Z_AXIS] = desired[i]
        f_meas[Z_AXIS] = f
        ctrl = parallel_step(ctrl, v_d, f_d, f_meas, dt)
        plant = computed_torque_plant_step(plant, ctrl.commanded[Z_AXIS], 0.0, 0.0, -f)
        if not np.all(np.isfinite(plant.q)):
            logger.warning("force episode diverged at step %d", i)
            diverged = True
            steps = i + 1
            break

    return ForceEpisode(
        times=np.arange(1, steps + 1) * dt,
        forces=forces[:steps],
        desired=desired[:steps],
        press_depth=depths[:steps],
        contact_counts=counts[:steps],
        net_stiffness=stiffness_zz[:steps],
        phase_ranges=ranges,
        diverged=diverged,
    )


def _settle_time(errors: np.ndarray, band: float, hold_steps: int, dt: float) -> Optional[float]:
    outside = np.flatnonzero(np.abs(errors) > band)
    if outside.size == 0:
        return 0.0
    first_inside_run = outside[-1] + 1
    if errors.shape[0] - first_inside_run >= hold_steps:
        return first_inside_run * dt
    return None


def analyze_phases(episode: ForceEpisode, dt: float) -> List[ForcePhaseReport]:
    """
    Settling and instability per force phase

    A phase settles once the force stays within +/-10% of f_d for 0.5 s up to
    the end of the phase; it is unstable when the final third's error envelope
    exceeds the band and has not shrunk below 80% of the middle third's.
    """
    reports = []
    hold_steps = int(round(SETTLE_HOLD / dt))
    for start, stop in episode.phase_ranges:
        stop = min(stop, episode.forces.shape[0])
        if stop <= start:
            break
        f_d = float(episode.desired[start])
        errors = episode.forces[start:stop] - f_d
        band = SETTLE_BAND * f_d
        settle = _settle_time(errors, band, hold_steps, dt)
        third = max(1, errors.shape[0] // 3)
        middle = float(np.abs(errors[third:2 * third]).max()) if errors.shape[0] >= 3 else float(np.abs(errors).max())
        final = float(np.abs(errors[-third:]).max())
        ratio = final / middle if middle > 0.0 else 0.0
        unstable = final > band and ratio >= GROWTH_RATIO
        reports.append(ForcePhaseReport(force=f_d, settled=settle is not None and not unstable,
                                        settle_time_s=settle, unstable=unstable,
                                        final_envelope_n=final, envelope_ratio=ratio))
    return reports
