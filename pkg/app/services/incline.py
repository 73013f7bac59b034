"""
Incline scene - a box sliding down a strip-decomposed inclined plane
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from ..lib.collision import BoxShape, ConvexPiece, PieceBatch, incline_frame, incline_strips
from ..lib.dynamics import BodyState, Trajectory
from ..lib.errors import NoSlideError
from ..models.schema import InclineSceneSettings

logger = logging.getLogger(__name__)


def incline_analytic(theta: float, mu_k: float, g: float, x0: float, t) -> Tuple[np.ndarray, np.ndarray]:
    """
    Newton's-second-law slide of a block released at rest

    Args:
        theta: incline angle [rad]
        mu_k: kinetic friction coefficient
        g: gravity magnitude [m/s^2]
        x0: initial along-slope position [m]
        t: time or array of times [s]

    Returns:
        (along-slope position, along-slope speed) with a = g (sin(theta) - mu_k cos(theta))

    Raises:
        NoSlideError: tan(theta) <= mu_k, the block does not slide
    """
    if math.tan(theta) <= mu_k:
        raise NoSlideError(f"tan(theta)={math.tan(theta):.4f} <= mu_k={mu_k}: the block stays put")
    a = sliding_acceleration(theta, mu_k, g)
    t = np.asarray(t, dtype=float)
    return x0 + 0.5 * a * t * t, a * t


def sliding_acceleration(theta: float, mu_k: float, g: float) -> float:
    return g * (math.sin(theta) - mu_k * math.cos(theta))


@dataclass(frozen=True, eq=False)
class InclineScene:
    settings: InclineSceneSettings
    shape: BoxShape
    pieces: List[ConvexPiece]
    batch: PieceBatch
    initial: BodyState
    start_s: float

    @property
    def theta(self) -> float:
        return math.radians(self.settings.strips.angle_deg)

    @property
    def base_x(self) -> float:
        """World x of the incline base"""
        return self.settings.strips.length * math.cos(self.theta)

    @property
    def strip_count(self) -> int:
        return len(self.pieces) - int(self.settings.strips.ground)

    def analytic_z(self, mu_k: float, g: float, t) -> np.ndarray:
        """Box-centre z of the analytic slide"""
        s, _ = incline_analytic(self.theta, mu_k, g, self.start_s, t)
        return self.initial.position[2] - (s - self.start_s) * math.sin(self.theta)

    def slide_end_time(self, mu_k: float, g: float) -> float:
        """Time at which the analytic box front reaches the incline base"""
        travel = self.settings.strips.length - (self.start_s + self.settings.box_half_size)
        return math.sqrt(2.0 * max(travel, 0.0) / sliding_acceleration(self.theta, mu_k, g))

    def reached_ground(self, trajectory: Trajectory) -> bool:
        if trajectory.frame.empty:
            return False
        return bool(trajectory.frame["px"].iloc[-1] > self.base_x)


def build_incline(settings: InclineSceneSettings) -> InclineScene:
    """
    Box resting on the first strip with its back edge start_offset below the top edge

    The box is rotated about y by the incline angle so its bottom face lies on
    the surface; bottom vertices start exactly on the surface.
    """
    strips = settings.strips
    pieces = incline_strips(strips)
    down, normal = incline_frame(strips.angle_deg)
    h = settings.box_half_size
    start_s = settings.start_offset + h
    centre = start_s * down + h * normal
    rotation = Rotation.from_euler("y", strips.angle_deg, degrees=True)
    x, y, z, w = rotation.as_quat()
    shape = BoxShape((h, h, h))
    initial = BodyState.at_rest(centre, settings.box_mass, shape.inertia(settings.box_mass), (w, x, y, z))
    logger.info("incline scene: %d strips at %.1f deg, box %.3f m", len(pieces) - int(strips.ground),
                strips.angle_deg, 2.0 * h)
    return InclineScene(settings, shape, pieces, PieceBatch(pieces), initial, start_s)
