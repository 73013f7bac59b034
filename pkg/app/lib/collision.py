"""
Collision - sample-point narrow phase against convex environment pieces

The dynamic body is represented by sample points (box vertices, cylinder rim
and cap centres); the static environment is a decomposition into convex
pieces {x : n.x <= d}. Every (piece, sample point) pair with the point inside
the piece yields at most one contact, so a finer decomposition generates more
contacts for the same physical overlap.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.transform import Rotation

from ..models.schema import (BoxShapeSettings, CylinderShapeSettings, InclineStripsSettings,
                             PieceSettings)
from .contacts import UNIT_TOLERANCE, ContactSet
from .errors import InvalidParameterError

logger = logging.getLogger(__name__)

FACE_ORDER = ("+x", "-x", "+y", "-y", "+z", "-z")
_FACE_NORMALS = {
    "+x": (1.0, 0.0, 0.0), "-x": (-1.0, 0.0, 0.0),
    "+y": (0.0, 1.0, 0.0), "-y": (0.0, -1.0, 0.0),
    "+z": (0.0, 0.0, 1.0), "-z": (0.0, 0.0, -1.0),
}


@dataclass(frozen=True, eq=False)
class Halfspace:
    """n.x <= d with unit outward normal n; internal faces bound membership only"""

    normal: np.ndarray
    offset: float
    internal: bool = False

    def __post_init__(self):
        normal = np.array(self.normal, dtype=float).reshape(3)
        if abs(float(np.linalg.norm(normal)) - 1.0) > UNIT_TOLERANCE:
            raise InvalidParameterError(f"halfspace normal {normal.tolist()} is not a unit vector")
        normal.flags.writeable = False
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))


@dataclass(frozen=True, eq=False)
class ConvexPiece:
    id: int
    halfspaces: Tuple[Halfspace, ...]

    def __post_init__(self):
        halfspaces = tuple(self.halfspaces)
        if not halfspaces:
            raise InvalidParameterError(f"piece {self.id} has no halfspaces")
        object.__setattr__(self, "halfspaces", halfspaces)

    @property
    def contact_faces(self) -> List[int]:
        return [i for i, h in enumerate(self.halfspaces) if not h.internal]


@dataclass(frozen=True)
class BoxShape:
    half_extents: Tuple[float, float, float]

    def __post_init__(self):
        if len(self.half_extents) != 3 or min(self.half_extents) <= 0.0:
            raise InvalidParameterError(f"box half extents must be 3 positive values, got {self.half_extents}")
        object.__setattr__(self, "half_extents", tuple(float(v) for v in self.half_extents))

    def inertia(self, mass: float) -> np.ndarray:
        a, b, c = (2.0 * v for v in self.half_extents)
        return mass / 12.0 * np.diag([b * b + c * c, a * a + c * c, a * a + b * b])


@dataclass(frozen=True)
class CylinderShape:
    radius: float
    half_height: float
    rim_samples: int = 8

    def __post_init__(self):
        if self.radius <= 0.0 or self.half_height <= 0.0:
            raise InvalidParameterError("cylinder radius and half height must be > 0")
        if self.rim_samples < 8:
            raise InvalidParameterError(f"rim sample count must be >= 8, got {self.rim_samples}")

    def inertia(self, mass: float) -> np.ndarray:
        r, h = self.radius, 2.0 * self.half_height
        lateral = mass * (3.0 * r * r + h * h) / 12.0
        return np.diag([lateral, lateral, 0.5 * mass * r * r])


DynamicShape = Union[BoxShape, CylinderShape]


def shape_from_settings(settings: Union[BoxShapeSettings, CylinderShapeSettings]) -> DynamicShape:
    if settings.kind == "box":
        return BoxShape(settings.half_extents)
    return CylinderShape(settings.radius, settings.half_height, settings.rim_samples)


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform; orientation is a unit quaternion (w, x, y, z)"""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        object.__setattr__(self, "position", np.array(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "orientation", np.array(self.orientation, dtype=float).reshape(4))

    @classmethod
    def from_rotation(cls, position: Sequence[float], rotation: Rotation) -> "Pose":
        x, y, z, w = rotation.as_quat()
        return cls(position, np.array([w, x, y, z]))

    @property
    def rotation(self) -> Rotation:
        w, x, y, z = self.orientation
        return Rotation.from_quat([x, y, z, w])

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.rotation.apply(points) + self.position


def local_samples(shape: DynamicShape) -> np.ndarray:
    """Body-frame sample points in their fixed order"""
    if isinstance(shape, BoxShape):
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=3)))
        return signs * np.array(shape.half_extents)
    angles = 2.0 * math.pi * np.arange(shape.rim_samples) / shape.rim_samples
    rim = np.stack([shape.radius * np.cos(angles), shape.radius * np.sin(angles)], axis=1)
    caps = []
    for z in (-shape.half_height, shape.half_height):
        caps.append(np.hstack([rim, np.full((shape.rim_samples, 1), z)]))
    centres = np.array([[0.0, 0.0, -shape.half_height], [0.0, 0.0, shape.half_height]])
    return np.vstack(caps + [centres])


def sample_points(shape: DynamicShape, pose: Pose) -> np.ndarray:
    """
    World-frame sample points of a body

    box -> its 8 vertices; cylinder -> rim samples of the lower cap, rim
    samples of the upper cap, then the lower and upper cap centres.
    """
    return pose.apply(local_samples(shape))


def point_vs_piece(point: Sequence[float], piece: ConvexPiece) -> Optional[Tuple[float, np.ndarray]]:
    """
    Depth and normal of a point inside a piece, or None

    depth = min over contact faces of (d - n.x); ties go to the lowest face index.
    """
    point = np.asarray(point, dtype=float)
    best_depth, best_normal = math.inf, None
    for face in piece.halfspaces:
        slack = face.offset - float(face.normal @ point)
        if slack < 0.0:
            return None
        if not face.internal and slack < best_depth:
            best_depth, best_normal = slack, face.normal
    if best_normal is None or best_depth <= 0.0:
        return None
    return best_depth, best_normal.copy()


class PieceBatch:
    """
    Pieces packed into padded (P, F) arrays for a vectorized narrow phase

    Padding faces have a zero normal and infinite offset, so they never
    exclude a point and never win the depth minimum.
    """

    def __init__(self, pieces: Iterable[ConvexPiece]):
        self.pieces = sorted(pieces, key=lambda p: p.id)
        count = len(self.pieces)
        width = max((len(p.halfspaces) for p in self.pieces), default=1)
        self.ids = np.array([p.id for p in self.pieces], dtype=int)
        self.normals = np.zeros((count, width, 3))
        self.offsets = np.full((count, width), np.inf)
        self.contact_mask = np.zeros((count, width), dtype=bool)
        for i, piece in enumerate(self.pieces):
            for j, face in enumerate(piece.halfspaces):
                self.normals[i, j] = face.normal
                self.offsets[i, j] = face.offset
                self.contact_mask[i, j] = not face.internal

    def __len__(self) -> int:
        return len(self.pieces)

    def query(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        All (piece, sample) penetrations

        Returns:
            piece indices, sample indices, depths, normals; sorted by (piece id, sample index)
        """
        if not len(self.pieces) or points.shape[0] == 0:
            return np.zeros(0, int), np.zeros(0, int), np.zeros(0), np.zeros((0, 3))
        # slack[p, f, s] = d_pf - n_pf . x_s
        slack = self.offsets[:, :, None] - np.einsum("pfk,sk->pfs", self.normals, points)
        inside = np.all(slack >= 0.0, axis=1)
        face_depth = np.where(self.contact_mask[:, :, None], slack, np.inf)
        face = np.argmin(face_depth, axis=1)
        depth = np.take_along_axis(face_depth, face[:, None, :], axis=1)[:, 0, :]
        hit = inside & np.isfinite(depth) & (depth > 0.0)
        piece_idx, sample_idx = np.nonzero(hit)
        normals = self.normals[piece_idx, face[piece_idx, sample_idx]]
        return piece_idx, sample_idx, depth[piece_idx, sample_idx], normals


PieceSource = Union[PieceBatch, Sequence[ConvexPiece]]


def generate_contacts(shape: DynamicShape, pose: Pose, pieces: PieceSource,
                      stiffness: float, damping: float = 0.0) -> ContactSet:
    """
    Contacts between one body and the environment pieces

    One contact per (piece, sample point) with positive depth, positioned at
    the sample point, ordered by (piece id, sample index).
    """
    batch = pieces if isinstance(pieces, PieceBatch) else PieceBatch(pieces)
    points = sample_points(shape, pose)
    _, sample_idx, depths, normals = batch.query(points)
    if depths.size == 0:
        return ContactSet.empty(stiffness, damping)
    return ContactSet(points[sample_idx], normals, depths, np.ones(depths.size), stiffness, damping)


# Piece builders

def halfspace_piece(piece_id: int, normal: Sequence[float], offset: float) -> ConvexPiece:
    """Unbounded piece n.x <= d"""
    return ConvexPiece(piece_id, (Halfspace(normal, offset),))


def slab(piece_id: int, top: float = 0.0, thickness: Optional[float] = None) -> ConvexPiece:
    """Horizontal slab z <= top, optionally bounded below by an internal face"""
    faces = [Halfspace((0.0, 0.0, 1.0), top)]
    if thickness is not None:
        faces.append(Halfspace((0.0, 0.0, -1.0), -(top - thickness), internal=True))
    return ConvexPiece(piece_id, tuple(faces))


def box_piece(piece_id: int, lower: Sequence[float], upper: Sequence[float],
              contact_faces: Optional[Iterable[str]] = None) -> ConvexPiece:
    """
    Axis-aligned box piece, faces in FACE_ORDER

    Args:
        contact_faces: face names that can serve as contact faces; the rest are
            internal. None makes every face a contact face.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(upper <= lower):
        raise InvalidParameterError("box piece needs upper > lower on every axis")
    contact = set(FACE_ORDER if contact_faces is None else contact_faces)
    unknown = contact - set(FACE_ORDER)
    if unknown:
        raise InvalidParameterError(f"unknown face names {sorted(unknown)}")
    faces = []
    for name in FACE_ORDER:
        axis = "xyz".index(name[1])
        offset = upper[axis] if name[0] == "+" else -lower[axis]
        faces.append(Halfspace(_FACE_NORMALS[name], offset, internal=name not in contact))
    return ConvexPiece(piece_id, tuple(faces))


def incline_frame(angle_deg: float) -> Tuple[np.ndarray, np.ndarray]:
    """(down-slope direction u, surface normal n) of an incline rising towards -x"""
    theta = math.radians(angle_deg)
    down = np.array([math.cos(theta), 0.0, -math.sin(theta)])
    normal = np.array([math.sin(theta), 0.0, math.cos(theta)])
    return down, normal


def incline_strip_count(settings: InclineStripsSettings) -> int:
    """Strips that fit on the slope for a contact budget of `count` (4 vertices per strip)"""
    wanted = math.ceil(settings.count / 4)
    fitting = math.ceil(settings.length / settings.strip_length)
    return max(1, min(wanted, fitting))


def incline_strips(settings: InclineStripsSettings, first_id: int = 0) -> List[ConvexPiece]:
    """
    Nested strip decomposition of an inclined plane

    The incline surface passes through the origin with its top edge at s = 0
    and its base at s = length along the down-slope direction. Strip j covers
    s in [j * strip_length, length]; only its top face is a contact face, so a
    box sliding down picks up one more strip per strip_length travelled and the
    contact count grows with the distance descended. A horizontal ground slab
    follows the base when `ground` is set.
    """
    down, normal = incline_frame(settings.angle_deg)
    side = np.array([0.0, 1.0, 0.0])
    half_width = 0.5 * settings.width
    pieces = []
    for j in range(incline_strip_count(settings)):
        start = j * settings.strip_length
        pieces.append(ConvexPiece(first_id + j, (
            Halfspace(normal, 0.0),
            Halfspace(-normal, settings.thickness, internal=True),
            Halfspace(-down, -start, internal=True),
            Halfspace(down, settings.length, internal=True),
            Halfspace(side, half_width, internal=True),
            Halfspace(-side, half_width, internal=True),
        )))
    if settings.ground:
        base = settings.length * down
        pieces.append(ConvexPiece(first_id + len(pieces), (
            Halfspace((0.0, 0.0, 1.0), base[2]),
            Halfspace((0.0, 0.0, -1.0), -(base[2] - settings.thickness), internal=True),
            Halfspace((-1.0, 0.0, 0.0), -base[0], internal=True),
            Halfspace((0.0, 1.0, 0.0), half_width, internal=True),
            Halfspace((0.0, -1.0, 0.0), half_width, internal=True),
        )))
    logger.debug("incline decomposition: %d strips, ground=%s", len(pieces) - int(settings.ground), settings.ground)
    return pieces


def pieces_from_settings(settings: Iterable[PieceSettings]) -> List[ConvexPiece]:
    return [
        ConvexPiece(p.id, tuple(Halfspace(h.n, h.d, h.internal) for h in p.halfspaces))
        for p in settings
    ]
