"""
Dynamics - one rigid body under gravity and penalty contacts

Each step runs the contact pipeline

    generate_contacts -> reduce (optional) -> bound stiffness (optional) -> response

and integrates with semi-implicit Euler: velocities from forces first, then
positions and orientation from the new velocities.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.transform import Rotation

from ..models.schema import ReductionConfig, SceneConfig, StiffnessBound
from ..utils.artifacts import write_frame_csv
from ..utils.timers import PhaseClock
from .collision import DynamicShape, PieceBatch, PieceSource, Pose, generate_contacts
from .contacts import ContactPoint, ContactSet, net_stiffness_diagonal, spring_energy
from .errors import InvalidParameterError, SimulationDivergedError
from .reducer import reduce
from .stiffness_qp import resolve_k_max, scale_contacts

logger = logging.getLogger(__name__)

REFERENCE_CONTACTS = 4

TRAJECTORY_COLUMNS = [
    "t", "px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "wx", "wy", "wz",
    "n_raw", "n_reduced", "ke_xx", "ke_yy", "ke_zz",
    "t_collide_us", "t_reduce_us", "t_qp_us", "t_response_us",
]
PHASES = ("t_collide_us", "t_reduce_us", "t_qp_us", "t_response_us")


def critical_damping(stiffness: float, mass: float, reference_contacts: int = REFERENCE_CONTACTS) -> float:
    """Per-contact damping b = 2 sqrt(K m / N_ref)"""
    return 2.0 * math.sqrt(stiffness * mass / reference_contacts)


@dataclass(frozen=True, eq=False)
class BodyState:
    """
    Free rigid body

    Attributes:
        position: centre of mass [m]
        orientation: unit quaternion (w, x, y, z)
        linear_velocity: [m/s]
        angular_velocity: world-frame [rad/s]
        mass: [kg]
        inertia: body-frame inertia [kg m^2]
        inertia_inv: inverse of `inertia`; when omitted the inertia is checked
            (symmetric, positive definite) and inverted
    """

    position: np.ndarray
    orientation: np.ndarray
    linear_velocity: np.ndarray
    angular_velocity: np.ndarray
    mass: float
    inertia: np.ndarray
    inertia_inv: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        quat = np.array(self.orientation, dtype=float).reshape(4)
        inertia = np.array(self.inertia, dtype=float).reshape(3, 3)
        if abs(float(np.linalg.norm(quat)) - 1.0) > 1e-9:
            raise InvalidParameterError(f"orientation {quat.tolist()} is not a unit quaternion")
        if not self.mass > 0.0:
            raise InvalidParameterError(f"mass must be > 0, got {self.mass}")
        if self.inertia_inv is None:
            if np.abs(inertia - inertia.T).max() > 1e-12 * max(1.0, np.abs(inertia).max()):
                raise InvalidParameterError("inertia must be symmetric")
            try:
                np.linalg.cholesky(inertia)
            except np.linalg.LinAlgError:
                raise InvalidParameterError("inertia must be positive definite") from None
            object.__setattr__(self, "inertia_inv", np.linalg.inv(inertia))
        object.__setattr__(self, "position", np.array(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "orientation", quat)
        object.__setattr__(self, "linear_velocity", np.array(self.linear_velocity, dtype=float).reshape(3))
        object.__setattr__(self, "angular_velocity", np.array(self.angular_velocity, dtype=float).reshape(3))
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "inertia", inertia)

    @classmethod
    def at_rest(cls, position: Sequence[float], mass: float, inertia: np.ndarray,
                orientation: Sequence[float] = (1.0, 0.0, 0.0, 0.0)) -> "BodyState":
        return cls(position, orientation, np.zeros(3), np.zeros(3), mass, inertia)

    @property
    def rotation(self) -> Rotation:
        w, x, y, z = self.orientation
        return Rotation.from_quat([x, y, z, w])

    @property
    def pose(self) -> Pose:
        return Pose(self.position, self.orientation)

    def world_inertia(self) -> np.ndarray:
        R = self.rotation.as_matrix()
        return R @ self.inertia @ R.T


@dataclass(frozen=True)
class SimConfig:
    """
    Runtime settings of one simulation

    reduction / stiffness_bound set to None switch the corresponding pipeline
    stage off; both off is the raw engine.
    """

    dt: float = 1e-4
    duration: float = 3.0
    gravity: Tuple[float, float, float] = (0.0, 0.0, -9.81)
    mu_s: float = 0.35
    mu_k: float = 0.3
    stick_velocity: float = 1e-3
    stiffness: float = 1e5
    damping: float = 0.0
    reduction: Optional[ReductionConfig] = None
    stiffness_bound: Optional[StiffnessBound] = None
    energy_guard: Optional[float] = 1.0
    record_every: int = 1

    def __post_init__(self):
        if not self.dt > 0.0:
            raise InvalidParameterError(f"dt must be > 0, got {self.dt}")
        if self.duration < self.dt:
            raise InvalidParameterError("duration must be >= dt")
        if not self.mu_s >= self.mu_k >= 0.0:
            raise InvalidParameterError("friction requires mu_s >= mu_k >= 0")
        if not self.stick_velocity > 0.0:
            raise InvalidParameterError("stick_velocity must be > 0")
        if self.record_every < 1:
            raise InvalidParameterError("record_every must be >= 1")

    @classmethod
    def from_config(cls, config: SceneConfig, mass: float, **overrides) -> "SimConfig":
        """Resolve a validated SceneConfig (including 'critical' damping) for a body of `mass`"""
        material = config.material
        damping = (critical_damping(material.stiffness, mass)
                   if material.damping == "critical" else float(material.damping))
        values = dict(
            dt=config.sim.dt,
            duration=config.sim.duration,
            gravity=tuple(config.sim.gravity),
            mu_s=config.sim.mu_s,
            mu_k=config.sim.mu_k,
            stick_velocity=config.sim.stick_velocity,
            stiffness=material.stiffness,
            damping=damping,
            reduction=config.reduction_or_none,
            stiffness_bound=config.bound_or_none,
            energy_guard=config.sim.energy_guard,
            record_every=config.sim.record_every,
        )
        values.update(overrides)
        return cls(**values)

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def k_max(self) -> Optional[float]:
        return resolve_k_max(self.stiffness_bound, self.stiffness)


@dataclass(frozen=True, eq=False)
class StepDiagnostics:
    n_raw: int
    n_reduced: int
    net_stiffness: np.ndarray
    energy: float
    t_collide_us: float
    t_reduce_us: float
    t_qp_us: float
    t_response_us: float
    qp_objective: Optional[float] = None

    def phase_times(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in PHASES}


def _penalty_force(normal: np.ndarray, depth: float, scale: float, stiffness: float, damping: float,
                   velocity: np.ndarray, mu_s: float, mu_k: float, stick_velocity: float) -> np.ndarray:
    v_n = float(velocity @ normal)
    f_n = max(0.0, scale * stiffness * depth - damping * v_n)
    force = f_n * normal
    if f_n == 0.0:
        return force
    slip = velocity - v_n * normal
    speed = math.sqrt(float(slip @ slip))
    if speed == 0.0:
        return force
    if speed < stick_velocity:
        magnitude = min(mu_s * f_n, mu_s * f_n * speed / stick_velocity)
    else:
        magnitude = mu_k * f_n
    return force - (magnitude / speed) * slip


def contact_force(point: ContactPoint, stiffness: float, damping: float, velocity: np.ndarray,
                  mu_s: float, mu_k: float, stick_velocity: float) -> np.ndarray:
    """
    Penalty force of one contact on the body

    F_n = max(0, s K depth - b v_n) with v_n the separating normal velocity.
    Below stick_velocity the friction is a linear ramp mu_s F_n |v_t| / v_stick,
    above it kinetic mu_k F_n; friction always opposes the slip velocity.
    """
    return _penalty_force(point.normal, point.depth, point.scale, stiffness, damping,
                          np.asarray(velocity, dtype=float), mu_s, mu_k, stick_velocity)


def contact_forces(normals: np.ndarray, depths: np.ndarray, scales: np.ndarray, stiffness: float,
                   damping: float, velocities: np.ndarray, mu_s: float, mu_k: float,
                   stick_velocity: float) -> np.ndarray:
    """
    contact_force over the columns of a contact set, one row per contact

    Rows are read straight from the arrays and handled one at a time in
    input order.
    """
    forces = np.zeros((normals.shape[0], 3))
    for i, (depth, scale) in enumerate(zip(np.asarray(depths).tolist(), np.asarray(scales).tolist())):
        forces[i] = _penalty_force(normals[i], depth, scale, stiffness, damping, velocities[i],
                                   mu_s, mu_k, stick_velocity)
    return forces


def total_energy(state: BodyState, contacts: Optional[ContactSet], gravity: Sequence[float],
                 inertia_world: Optional[np.ndarray] = None) -> float:
    """Kinetic + gravitational potential + contact spring energy"""
    inertia_world = state.world_inertia() if inertia_world is None else inertia_world
    v = state.linear_velocity
    w = state.angular_velocity
    kinetic = 0.5 * state.mass * float(v @ v) + 0.5 * float(w @ inertia_world @ w)
    potential = -state.mass * float(np.asarray(gravity, dtype=float) @ state.position)
    spring = spring_energy(contacts) if contacts is not None else 0.0
    return kinetic + potential + spring


def _applied_contacts(state: BodyState, shape: DynamicShape, pieces: PieceSource,
                      cfg: SimConfig) -> Tuple[ContactSet, int, Optional[float], List[float]]:
    clock = PhaseClock()
    raw = generate_contacts(shape, state.pose, pieces, cfg.stiffness, cfg.damping)
    t_collide = clock.lap()
    contacts = reduce(raw, cfg.reduction) if cfg.reduction is not None and len(raw) else raw
    t_reduce = clock.lap()
    objective = None
    k_max = cfg.k_max
    if k_max is not None and len(contacts):
        contacts, solution = scale_contacts(contacts, k_max)
        objective = solution.objective
    t_qp = clock.lap()
    return contacts, len(raw), objective, [t_collide, t_reduce, t_qp]


def contact_wrench(state: BodyState, contacts: ContactSet, cfg: SimConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Summed contact force and torque about the centre of mass"""
    if not len(contacts):
        return np.zeros(3), np.zeros(3)
    arms = contacts.positions - state.position
    velocities = state.linear_velocity + np.cross(state.angular_velocity, arms)
    forces = contact_forces(contacts.normals, contacts.depths, contacts.scales, contacts.stiffness,
                            contacts.damping, velocities, cfg.mu_s, cfg.mu_k, cfg.stick_velocity)
    return forces.sum(axis=0), np.cross(arms, forces).sum(axis=0)


def _diagnostics(state: BodyState, contacts: ContactSet, n_raw: int, objective: Optional[float],
                 times: List[float], t_response: float, gravity: np.ndarray,
                 inertia_world: Optional[np.ndarray] = None) -> StepDiagnostics:
    return StepDiagnostics(
        n_raw=n_raw,
        n_reduced=len(contacts),
        net_stiffness=net_stiffness_diagonal(contacts),
        energy=total_energy(state, contacts, gravity, inertia_world),
        t_collide_us=times[0],
        t_reduce_us=times[1],
        t_qp_us=times[2],
        t_response_us=t_response,
        qp_objective=objective,
    )


def scripted_step(state: BodyState, shape: DynamicShape, pieces: PieceSource,
                  cfg: SimConfig) -> Tuple[np.ndarray, StepDiagnostics]:
    """
    Contact pipeline and response at a prescribed state, without integration

    Used for bodies that follow a motion script: the state is given, and the
    contact wrench (force, torque) acting on it is returned as a 6-vector.
    """
    contacts, n_raw, objective, times = _applied_contacts(state, shape, pieces, cfg)
    clock = PhaseClock()
    force, torque = contact_wrench(state, contacts, cfg)
    t_response = clock.lap()
    gravity = np.asarray(cfg.gravity, dtype=float)
    return np.concatenate([force, torque]), _diagnostics(state, contacts, n_raw, objective, times,
                                                         t_response, gravity)


def step(state: BodyState, shape: DynamicShape, pieces: PieceSource, cfg: SimConfig,
         step_index: int = 0) -> Tuple[BodyState, StepDiagnostics]:
    """
    Advance one dt

    Raises:
        SimulationDivergedError: the new state is not finite
    """
    contacts, n_raw, objective, times = _applied_contacts(state, shape, pieces, cfg)

    clock = PhaseClock()
    contact_force_sum, torque = contact_wrench(state, contacts, cfg)
    t_response = clock.lap()
    gravity = np.asarray(cfg.gravity, dtype=float)
    force = state.mass * gravity + contact_force_sum

    rotation = state.rotation
    R = rotation.as_matrix()
    inertia_world = R @ state.inertia @ R.T
    inertia_world_inv = R @ state.inertia_inv @ R.T
    w = state.angular_velocity
    angular_acc = inertia_world_inv @ (torque - np.cross(w, inertia_world @ w))

    velocity = state.linear_velocity + force / state.mass * cfg.dt
    angular_velocity = w + angular_acc * cfg.dt
    position = state.position + velocity * cfg.dt
    new_rotation = Rotation.from_rotvec(angular_velocity * cfg.dt) * rotation

    if not (np.all(np.isfinite(position)) and np.all(np.isfinite(velocity))
            and np.all(np.isfinite(angular_velocity))):
        raise SimulationDivergedError(step_index, "non-finite state")
    x, y, z, qw = new_rotation.as_quat()
    quat = np.array([qw, x, y, z])
    quat /= np.linalg.norm(quat)
    new_state = BodyState(position, quat, velocity, angular_velocity, state.mass, state.inertia, state.inertia_inv)
    return new_state, _diagnostics(state, contacts, n_raw, objective, times, t_response, gravity, inertia_world)


@dataclass
class Trajectory:
    """
    Recorded run

    `frame` holds one row per recorded step in TRAJECTORY_COLUMNS order. The
    maxima and phase totals cover every step, recorded or not.
    """

    frame: pd.DataFrame
    final_state: BodyState
    steps: int
    diverged: bool = False
    diverged_step: Optional[int] = None
    divergence_reason: Optional[str] = None
    max_raw_contacts: int = 0
    max_net_stiffness: np.ndarray = field(default_factory=lambda: np.zeros(3))
    phase_totals_us: Dict[str, float] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return self.frame.copy()

    def write_csv(self, path) -> str:
        return str(write_frame_csv(self.frame, path))

    def mean_phase_us(self) -> Dict[str, float]:
        if not self.steps:
            return {name: 0.0 for name in PHASES}
        return {name: self.phase_totals_us.get(name, 0.0) / self.steps for name in PHASES}

    @property
    def times(self) -> np.ndarray:
        return self.frame["t"].to_numpy()

    @property
    def positions(self) -> np.ndarray:
        return self.frame[["px", "py", "pz"]].to_numpy()


def _row(t: float, state: BodyState, diag: StepDiagnostics) -> list:
    return [t, *state.position, *state.linear_velocity, *state.orientation, *state.angular_velocity,
            diag.n_raw, diag.n_reduced, *diag.net_stiffness,
            diag.t_collide_us, diag.t_reduce_us, diag.t_qp_us, diag.t_response_us]


class TrajectoryRecorder:
    """Collects recorded rows, phase totals and maxima while a run steps"""

    def __init__(self, record_every: int):
        self.record_every = record_every
        self.rows: List[list] = []
        self.totals = {name: 0.0 for name in PHASES}
        self.max_raw = 0
        self.max_stiffness = np.zeros(3)
        self.steps = 0

    def add(self, i: int, t: float, state: BodyState, diag: StepDiagnostics) -> None:
        self.steps += 1
        self.max_raw = max(self.max_raw, diag.n_raw)
        self.max_stiffness = np.maximum(self.max_stiffness, diag.net_stiffness)
        for name, value in diag.phase_times().items():
            self.totals[name] += value
        if (i + 1) % self.record_every == 0:
            self.rows.append(_row(t, state, diag))

    def finish(self, final_state: BodyState, diverged: bool = False, diverged_step: Optional[int] = None,
               reason: Optional[str] = None) -> Trajectory:
        return Trajectory(
            frame=pd.DataFrame(self.rows, columns=TRAJECTORY_COLUMNS),
            final_state=final_state,
            steps=self.steps,
            diverged=diverged,
            diverged_step=diverged_step,
            divergence_reason=reason,
            max_raw_contacts=self.max_raw,
            max_net_stiffness=self.max_stiffness,
            phase_totals_us=self.totals,
        )


def run(initial: BodyState, shape: DynamicShape, pieces: PieceSource, cfg: SimConfig) -> Trajectory:
    """
    Step for duration / dt steps and record the trajectory

    Divergence (non-finite state, or total energy rising more than
    energy_guard above the first step's) stops the run and is flagged on the
    trajectory rather than raised.
    """
    batch = pieces if isinstance(pieces, PieceBatch) else PieceBatch(pieces)
    recorder = TrajectoryRecorder(cfg.record_every)
    state = initial
    reference_energy = None
    diverged, diverged_step, reason = False, None, None

    logger.info("run: %d steps at dt=%g, reduction=%s, k_max=%s",
                cfg.steps, cfg.dt, "on" if cfg.reduction else "off", cfg.k_max)
    for i in range(cfg.steps):
        try:
            new_state, diag = step(state, shape, batch, cfg, i)
        except SimulationDivergedError as e:
            diverged, diverged_step, reason = True, e.step, e.reason
            break
        if reference_energy is None:
            reference_energy = diag.energy
        elif cfg.energy_guard is not None and diag.energy > reference_energy + cfg.energy_guard:
            diverged, diverged_step, reason = True, i, "energy blow-up"
            break
        state = new_state
        recorder.add(i, (i + 1) * cfg.dt, state, diag)

    if diverged:
        logger.warning("run diverged at step %d (t=%.4f s): %s", diverged_step, diverged_step * cfg.dt, reason)
    else:
        logger.info("run finished: %d steps, max raw contacts %d", recorder.steps, recorder.max_raw)
    return recorder.finish(state, diverged, diverged_step, reason)
