"""
Control - computed-torque joint plant, PI force loop and parallel position/force control

The inner loop compensates the plant model and the external torque exactly,
so each joint follows  e'' + D e' + K e = 0  with e = q_d - q, integrated
semi-implicitly. The force loop turns the force error into a position offset
u_f = k_p (f_d - f) + k_i * integral(f_d - f) that is added to a feedforward
velocity integral to form the commanded pose.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigvals

from .errors import InvalidParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class JointPlant:
    """
    Decoupled joints under a computed-torque controller

    Attributes:
        inertia: per-joint M_i [kg m^2]
        stiffness: per-joint inner-loop gain K_i
        damping: per-joint inner-loop gain D_i
        q, qd: joint positions and velocities
        dt: control period [s]
    """

    inertia: np.ndarray
    stiffness: np.ndarray
    damping: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    dt: float

    def __post_init__(self):
        arrays = {}
        for name in ("inertia", "stiffness", "damping", "q", "qd"):
            arrays[name] = np.atleast_1d(np.array(getattr(self, name), dtype=float))
        n = arrays["q"].shape[0]
        if any(a.shape != (n,) for a in arrays.values()):
            raise InvalidParameterError("joint plant arrays must all have n_joints entries")
        if np.any(arrays["inertia"] <= 0.0) or np.any(arrays["stiffness"] <= 0.0):
            raise InvalidParameterError("joint inertia and stiffness must be > 0")
        if np.any(arrays["damping"] < 0.0):
            raise InvalidParameterError("joint damping must be >= 0")
        if not self.dt > 0.0:
            raise InvalidParameterError(f"dt must be > 0, got {self.dt}")
        for name, value in arrays.items():
            object.__setattr__(self, name, value)

    @classmethod
    def single(cls, K: float, D: float, M: float = 1.0, dt: float = 1e-4, q0: float = 0.0) -> "JointPlant":
        return cls([M], [K], [D], [q0], [0.0], dt)

    @property
    def n_joints(self) -> int:
        return self.q.shape[0]


def computed_torque_plant_step(plant: JointPlant, q_d: Sequence[float], qd_d: Sequence[float],
                               qdd_d: Sequence[float], tau_ext: Sequence[float]) -> JointPlant:
    """
    One control period of  tau = M (q''_d + D (q'_d - q') + K (q_d - q)) + tau_ext

    applied to the plant M q'' = tau - tau_ext (Coriolis and gravity terms are zero).
    """
    q_d, qd_d, qdd_d, tau_ext = (np.broadcast_to(np.asarray(v, dtype=float), plant.q.shape)
                                 for v in (q_d, qd_d, qdd_d, tau_ext))
    tau = plant.inertia * (qdd_d + plant.damping * (qd_d - plant.qd) + plant.stiffness * (q_d - plant.q)) + tau_ext
    qdd = (tau - tau_ext) / plant.inertia
    qd = plant.qd + plant.dt * qdd
    q = plant.q + plant.dt * qd
    return replace(plant, q=q, qd=qd)


def critically_damped_error(e0: float, K: float, t) -> np.ndarray:
    """Closed form e(t) = e0 (1 + w t) exp(-w t), w = sqrt(K), for D = 2 sqrt(K) and e'(0) = 0"""
    omega = math.sqrt(K)
    t = np.asarray(t, dtype=float)
    return e0 * (1.0 + omega * t) * np.exp(-omega * t)


@dataclass(frozen=True)
class ForceLoopState:
    kp: float
    ki: float
    f_limit: float = 10.0
    integrator: float = 0.0

    def __post_init__(self):
        if self.kp < 0.0 or self.ki < 0.0:
            raise InvalidParameterError("force loop gains must be >= 0")
        if not self.f_limit > 0.0:
            raise InvalidParameterError("f_limit must be > 0")
        if abs(self.integrator) > self.f_limit:
            raise InvalidParameterError("integrator exceeds f_limit")


def force_pi_step(loop: ForceLoopState, f_d: float, f_meas: float, dt: float) -> Tuple[float, ForceLoopState]:
    """
    PI force law with a clamped integrator

    Returns:
        (u_f, updated loop); the integrator is clamped to [-f_limit, f_limit]
    """
    if not dt > 0.0:
        raise InvalidParameterError(f"dt must be > 0, got {dt}")
    error = f_d - f_meas
    integrator = min(loop.f_limit, max(-loop.f_limit, loop.integrator + error * dt))
    u_f = loop.kp * error + loop.ki * integrator
    return u_f, replace(loop, integrator=integrator)


@dataclass(frozen=True, eq=False)
class ParallelController:
    """
    Commanded pose = base + integral(v_d dt) + u_f, force loops only on masked axes

    All quantities are 6-vectors (x, y, z, rx, ry, rz).
    """

    base: np.ndarray
    force_axes: Tuple[bool, ...]
    loops: Tuple[ForceLoopState, ...]
    velocity_integral: np.ndarray = field(default_factory=lambda: np.zeros(6))
    force_offset: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        object.__setattr__(self, "base", np.array(self.base, dtype=float).reshape(6))
        object.__setattr__(self, "velocity_integral", np.array(self.velocity_integral, dtype=float).reshape(6))
        object.__setattr__(self, "force_offset", np.array(self.force_offset, dtype=float).reshape(6))
        if len(self.force_axes) != 6 or len(self.loops) != 6:
            raise InvalidParameterError("parallel controller needs 6 force axes and 6 loops")
        object.__setattr__(self, "force_axes", tuple(bool(a) for a in self.force_axes))

    @classmethod
    def create(cls, kp: float, ki: float, f_limit: float, force_axes: Sequence[bool],
               base: Optional[Sequence[float]] = None) -> "ParallelController":
        loop = ForceLoopState(kp, ki, f_limit)
        return cls(np.zeros(6) if base is None else base, tuple(force_axes), (loop,) * 6)

    @property
    def commanded(self) -> np.ndarray:
        return self.base + self.velocity_integral + self.force_offset


def parallel_step(controller: ParallelController, v_d: Sequence[float], f_d: Sequence[float],
                  f_meas: Sequence[float], dt: float) -> ParallelController:
    """
    Advance the feedforward velocity integral and the force loops by dt

    The new commanded pose is `controller.commanded` of the returned value.
    """
    v_d = np.asarray(v_d, dtype=float).reshape(6)
    f_d = np.asarray(f_d, dtype=float).reshape(6)
    f_meas = np.asarray(f_meas, dtype=float).reshape(6)
    offsets = controller.force_offset.copy()
    loops = list(controller.loops)
    for axis, enabled in enumerate(controller.force_axes):
        if enabled:
            offsets[axis], loops[axis] = force_pi_step(loops[axis], f_d[axis], f_meas[axis], dt)
    return replace(controller, velocity_integral=controller.velocity_integral + v_d * dt,
                   force_offset=offsets, loops=tuple(loops))


def closed_loop_matrix(K_e: float, kp: float, ki: float, K: float, D: float, dt: float) -> np.ndarray:
    """
    Discrete transition matrix of one control period over the state [x, x', I]

    Order per period: f = K_e x, I += dt (f_d - f), x_d = kp (f_d - f) + ki I,
    then the semi-implicit inner loop x'' = K (x_d - x) - D x'. The set point
    only enters the affine part and is dropped.
    """
    g = (kp + ki * dt) * K_e + 1.0
    return np.array([
        [1.0 - dt * dt * K * g, dt * (1.0 - dt * D), dt * dt * K * ki],
        [-dt * K * g, 1.0 - dt * D, dt * K * ki],
        [-dt * K_e, 0.0, 1.0],
    ])


def stability_margin(K_e: float, kp: float, ki: float, K: float, D: float, dt: float) -> float:
    """
    Spectral radius of the force-controlled closed loop; < 1 is stable

    Without contact (K_e = 0) the integrator no longer sees the position and
    its unit mode is left out: the radius is that of the inner loop alone.
    """
    A = closed_loop_matrix(K_e, kp, ki, K, D, dt)
    if K_e == 0.0:
        A = A[:2, :2]
    return float(np.max(np.abs(eigvals(A))))


@dataclass(frozen=True)
class StabilitySplit:
    ki: float
    kp: float
    radius_low: float
    radius_high: float

    @property
    def margin(self) -> float:
        return min(1.0 - self.radius_low, self.radius_high - 1.0)


def find_stability_split(per_contact_stiffness: float, K: float, D: float, dt: float,
                         kp: float = 0.0, low_count: int = 4, high_count: int = 6,
                         ki_range: Tuple[float, float] = (1e-4, 1.0), samples: int = 400) -> Optional[StabilitySplit]:
    """
    Integral gain separating a stable low-contact loop from an unstable high-contact one

    Scans k_i on a log grid and keeps the gain with the largest margin
    min(1 - radius(low * K'), radius(high * K') - 1). Returns None when no
    gain on the grid splits the two.
    """
    best = None
    for ki in np.geomspace(ki_range[0], ki_range[1], samples):
        low = stability_margin(low_count * per_contact_stiffness, kp, ki, K, D, dt)
        high = stability_margin(high_count * per_contact_stiffness, kp, ki, K, D, dt)
        if low < 1.0 < high:
            candidate = StabilitySplit(float(ki), kp, low, high)
            if best is None or candidate.margin > best.margin:
                best = candidate
    if best is not None:
        logger.debug("stability split: ki=%.4g radius %.6f / %.6f", best.ki, best.radius_low, best.radius_high)
    return best
