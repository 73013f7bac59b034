"""
Peg insertion scene - a round peg driven along a motion script into a segmented bore

The plate is an annulus cut into `hole_segments` convex sector prisms around
the bore, the decomposition that makes a round hole produce redundant
contacts. The peg does not respond to contact: it follows the script
kinematically, and every step measures the contact wrench the pipeline
would apply at the scripted pose.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from ..lib.collision import ConvexPiece, CylinderShape, Halfspace, PieceBatch, Pose
from ..lib.dynamics import BodyState, SimConfig, Trajectory, TrajectoryRecorder, scripted_step
from ..models.schema import InsertionSegmentReport, PegInsertionSceneSettings
from .reward import reward

logger = logging.getLogger(__name__)


def hole_pieces(settings: PegInsertionSceneSettings) -> List[ConvexPiece]:
    """
    Plate around a bore of radius peg_radius + clearance, one sector prism per segment

    Sector m spans polar angles [m, m + 1] * 2 pi / segments. Its top face and
    its inner face (the bore wall, normal towards the axis) are contact faces;
    the bottom, the outer rim and the two radial cuts are internal.
    """
    bore = settings.peg_radius + settings.clearance
    span = 2.0 * math.pi / settings.hole_segments
    pieces = []
    for m in range(settings.hole_segments):
        lo, hi, mid = m * span, (m + 1) * span, (m + 0.5) * span
        u = np.array([math.cos(mid), math.sin(mid), 0.0])
        faces = (
            Halfspace((0.0, 0.0, 1.0), 0.0),
            Halfspace(-u, -bore),
            Halfspace((0.0, 0.0, -1.0), settings.plate_thickness, internal=True),
            Halfspace(u, settings.plate_radius, internal=True),
            Halfspace((math.sin(lo), -math.cos(lo), 0.0), 0.0, internal=True),
            Halfspace((-math.sin(hi), math.cos(hi), 0.0), 0.0, internal=True),
        )
        pieces.append(ConvexPiece(m, faces))
    return pieces


@dataclass(frozen=True, eq=False)
class PegInsertionScene:
    settings: PegInsertionSceneSettings
    shape: CylinderShape
    pieces: List[ConvexPiece]
    batch: PieceBatch

    @property
    def knots(self) -> np.ndarray:
        """Segment boundary times, starting at 0"""
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.settings.script])])

    @property
    def insertion_depth(self) -> float:
        return self.settings.start_offset[2] - self.settings.script[-1].offset[2]

    def script_samples(self, times) -> Tuple[np.ndarray, np.ndarray]:
        """
        Lower cap centre and tilt [deg] of the script at `times`

        Linear between knots; held at the last knot once the script has run out.
        """
        times = np.atleast_1d(np.asarray(times, dtype=float))
        settings = self.settings
        offsets = np.array([settings.start_offset] + [s.offset for s in settings.script], dtype=float)
        tilts = np.array([settings.start_tilt_deg] + [s.tilt_deg for s in settings.script])
        knots = self.knots
        sampled = np.stack([np.interp(times, knots, offsets[:, axis]) for axis in range(3)], axis=1)
        return sampled, np.interp(times, knots, tilts)

    def segment_index(self, times) -> np.ndarray:
        """Script segment active at each time; a knot belongs to the segment it starts"""
        index = np.searchsorted(self.knots[1:], np.asarray(times, dtype=float), side="right")
        return np.minimum(index, len(self.settings.script) - 1)

    def pose(self, t: float) -> Pose:
        offsets, tilts = self.script_samples(t)
        rotation = Rotation.from_euler("x", float(tilts[0]), degrees=True)
        return Pose.from_rotation(offsets[0] + rotation.apply([0.0, 0.0, self.shape.half_height]), rotation)


def build_peg_insertion(settings: PegInsertionSceneSettings) -> PegInsertionScene:
    shape = CylinderShape(settings.peg_radius, settings.peg_half_height, settings.rim_samples)
    pieces = hole_pieces(settings)
    return PegInsertionScene(settings, shape, pieces, PieceBatch(pieces))


@dataclass(frozen=True, eq=False)
class InsertionRun:
    trajectory: Trajectory
    times: np.ndarray
    wrenches: np.ndarray
    raw_contacts: np.ndarray
    applied_contacts: np.ndarray
    segments: np.ndarray
    insertion: np.ndarray


def run_insertion(scene: PegInsertionScene, sim: SimConfig) -> InsertionRun:
    """
    Drive the peg through its script, one pipeline evaluation per step

    Velocities come from finite differences of the sampled script, so contact
    damping sees the scripted motion.
    """
    settings = scene.settings
    steps = sim.steps
    times = np.arange(steps) * sim.dt
    offsets, tilts = scene.script_samples(times)
    rotations = Rotation.from_euler("x", tilts, degrees=True)
    centres = offsets + rotations.apply([0.0, 0.0, scene.shape.half_height])
    if steps > 1:
        velocities = np.gradient(centres, sim.dt, axis=0)
        spin = np.gradient(np.radians(tilts), sim.dt)
    else:
        velocities, spin = np.zeros((steps, 3)), np.zeros(steps)
    quats = rotations.as_quat()[:, [3, 0, 1, 2]]

    inertia = scene.shape.inertia(settings.peg_mass)
    inertia_inv = np.linalg.inv(inertia)
    recorder = TrajectoryRecorder(sim.record_every)
    wrenches = np.zeros((steps, 6))
    raw = np.zeros(steps, dtype=int)
    applied = np.zeros(steps, dtype=int)
    logger.info("peg insertion: %d steps over %d hole segments", steps, settings.hole_segments)
    state = None
    for i in range(steps):
        state = BodyState(centres[i], quats[i], velocities[i], (spin[i], 0.0, 0.0),
                          settings.peg_mass, inertia, inertia_inv)
        wrenches[i], diag = scripted_step(state, scene.shape, scene.batch, sim)
        raw[i], applied[i] = diag.n_raw, diag.n_reduced
        recorder.add(i, float(times[i]), state, diag)

    return InsertionRun(
        trajectory=recorder.finish(state),
        times=times,
        wrenches=wrenches,
        raw_contacts=raw,
        applied_contacts=applied,
        segments=scene.segment_index(times),
        insertion=settings.start_offset[2] - offsets[:, 2],
    )


def insertion_rewards(scene: PegInsertionScene, result: InsertionRun) -> np.ndarray:
    """Per-step reward of the insertion progress against the wrench limit"""
    return reward(result.insertion, 0.0, scene.insertion_depth, np.abs(result.wrenches),
                  scene.settings.wrench_limit)


def segment_reports(scene: PegInsertionScene, result: InsertionRun) -> List[InsertionSegmentReport]:
    """Contact counts and peak contact force per script segment; segments never reached are left out"""
    knots = scene.knots
    reports = []
    for j, segment in enumerate(scene.settings.script):
        mask = result.segments == j
        if not mask.any():
            continue
        reports.append(InsertionSegmentReport(
            name=segment.name,
            start_s=float(knots[j]),
            end_s=float(knots[j + 1]),
            mean_raw_contacts=float(result.raw_contacts[mask].mean()),
            mean_applied_contacts=float(result.applied_contacts[mask].mean()),
            max_force_n=float(np.linalg.norm(result.wrenches[mask, :3], axis=1).max()),
        ))
    return reports
