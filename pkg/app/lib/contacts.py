"""
Contact data model - contact points, contact sets and the stiffness they induce

A ContactSet keeps its points column-wise so the per-step pipeline
(generation -> reduction -> scaling -> response) works on whole arrays;
indexing or iterating materializes ContactPoint values.
"""

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Optional, Sequence

import numpy as np

from ..models.schema import ContactPointDocument, ContactSetDocument
from .errors import InvalidParameterError

UNIT_TOLERANCE = 1e-9


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class ContactPoint:
    """One generated contact: position [m], unit normal, depth [m], stiffness scale"""

    position: np.ndarray
    normal: np.ndarray
    depth: float
    scale: float = 1.0

    def __post_init__(self):
        position = np.array(self.position, dtype=float).reshape(3)
        normal = np.array(self.normal, dtype=float).reshape(3)
        if abs(math.sqrt(float(normal @ normal)) - 1.0) > UNIT_TOLERANCE:
            raise InvalidParameterError(f"contact normal {normal.tolist()} is not a unit vector")
        if not self.depth >= 0.0:
            raise InvalidParameterError(f"penetration depth must be >= 0, got {self.depth}")
        if not 0.0 <= self.scale <= 1.0:
            raise InvalidParameterError(f"stiffness scale must lie in [0, 1], got {self.scale}")
        object.__setattr__(self, "position", _frozen(position))
        object.__setattr__(self, "normal", _frozen(normal))
        object.__setattr__(self, "depth", float(self.depth))
        object.__setattr__(self, "scale", float(self.scale))

    def with_scale(self, scale: float) -> "ContactPoint":
        return ContactPoint(self.position, self.normal, self.depth, scale)


@dataclass(frozen=True, eq=False)
class ContactSet:
    """
    Ordered contacts sharing one material

    Attributes:
        positions: (n, 3) contact positions in meters
        normals: (n, 3) unit normals pointing from the environment into the body
        depths: (n,) penetration depths in meters
        scales: (n,) stiffness scale factors in [0, 1]
        stiffness: shared contact stiffness K [N/m]
        damping: shared contact damping b [N*s/m]
    """

    positions: np.ndarray
    normals: np.ndarray
    depths: np.ndarray
    scales: np.ndarray
    stiffness: float
    damping: float = 0.0

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float).reshape(-1, 3)
        normals = np.array(self.normals, dtype=float).reshape(-1, 3)
        depths = np.array(self.depths, dtype=float).reshape(-1)
        scales = np.array(self.scales, dtype=float).reshape(-1)
        n = positions.shape[0]
        if normals.shape[0] != n or depths.shape[0] != n or scales.shape[0] != n:
            raise InvalidParameterError(
                f"contact columns disagree in length: {n}, {normals.shape[0]}, "
                f"{depths.shape[0]}, {scales.shape[0]}"
            )
        if not self.stiffness > 0.0:
            raise InvalidParameterError(f"contact stiffness must be > 0, got {self.stiffness}")
        if not self.damping >= 0.0:
            raise InvalidParameterError(f"contact damping must be >= 0, got {self.damping}")
        if n:
            norms = np.sqrt(np.einsum("ij,ij->i", normals, normals))
            if np.any(np.abs(norms - 1.0) > UNIT_TOLERANCE):
                raise InvalidParameterError("contact normals must be unit vectors")
            if np.any(depths < 0.0):
                raise InvalidParameterError("penetration depths must be >= 0")
            if np.any(scales < 0.0) or np.any(scales > 1.0):
                raise InvalidParameterError("stiffness scales must lie in [0, 1]")
        object.__setattr__(self, "positions", _frozen(positions))
        object.__setattr__(self, "normals", _frozen(normals))
        object.__setattr__(self, "depths", _frozen(depths))
        object.__setattr__(self, "scales", _frozen(scales))
        object.__setattr__(self, "stiffness", float(self.stiffness))
        object.__setattr__(self, "damping", float(self.damping))

    @classmethod
    def empty(cls, stiffness: float, damping: float = 0.0) -> "ContactSet":
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0), np.zeros(0), stiffness, damping)

    @classmethod
    def from_points(cls, points: Iterable[ContactPoint], stiffness: float,
                    damping: float = 0.0) -> "ContactSet":
        points = list(points)
        if not points:
            return cls.empty(stiffness, damping)
        return cls(
            np.stack([p.position for p in points]),
            np.stack([p.normal for p in points]),
            np.array([p.depth for p in points]),
            np.array([p.scale for p in points]),
            stiffness,
            damping,
        )

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __getitem__(self, index: int) -> ContactPoint:
        return ContactPoint(self.positions[index], self.normals[index],
                            self.depths[index], self.scales[index])

    def __iter__(self) -> Iterator[ContactPoint]:
        for i in range(len(self)):
            yield self[i]

    @property
    def points(self) -> List[ContactPoint]:
        return list(self)

    def with_scales(self, scales: Sequence[float]) -> "ContactSet":
        return ContactSet(self.positions, self.normals, self.depths, np.asarray(scales, dtype=float),
                          self.stiffness, self.damping)

    def to_document(self) -> ContactSetDocument:
        return ContactSetDocument(
            stiffness=self.stiffness,
            damping=self.damping,
            points=[
                ContactPointDocument(p=p.tolist(), n=n.tolist(), depth=float(d), scale=float(s))
                for p, n, d, s in zip(self.positions, self.normals, self.depths, self.scales)
            ],
        )

    @classmethod
    def from_document(cls, document: ContactSetDocument) -> "ContactSet":
        if not document.points:
            return cls.empty(document.stiffness, document.damping)
        return cls(
            [pt.p for pt in document.points],
            [pt.n for pt in document.points],
            [pt.depth for pt in document.points],
            [pt.scale for pt in document.points],
            document.stiffness,
            document.damping,
        )

    def dumps(self) -> str:
        return self.to_document().model_dump_json()

    @classmethod
    def loads(cls, text: str) -> "ContactSet":
        return cls.from_document(ContactSetDocument.model_validate_json(text))


@dataclass(frozen=True, eq=False)
class StiffnessMatrix:
    """Symmetric positive semi-definite 3x3 stiffness [N/m]"""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float).reshape(3, 3)
        scale = max(1.0, float(np.abs(entries).max()))
        if np.abs(entries - entries.T).max() > UNIT_TOLERANCE * scale:
            raise InvalidParameterError("stiffness matrix must be symmetric")
        if np.linalg.eigvalsh(entries).min() < -UNIT_TOLERANCE * scale:
            raise InvalidParameterError("stiffness matrix must be positive semi-definite")
        object.__setattr__(self, "entries", _frozen(entries))

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries).copy()


def axis_distance(a: ContactPoint, b: ContactPoint, c: float) -> float:
    """Axis-weighted distance ||n_b - n_a||^2 + c * ||p_b - p_a||^2"""
    if c < 0.0:
        raise InvalidParameterError(f"metric weight c must be >= 0, got {c}")
    dn = b.normal - a.normal
    dp = b.position - a.position
    return float(dn @ dn + c * (dp @ dp))


def axis_stiffness_vector(point: ContactPoint) -> np.ndarray:
    """Per-axis stiffness share diag(n n^T) of one contact"""
    return point.normal ** 2


def equivalent_stiffness(contacts: ContactSet) -> StiffnessMatrix:
    """Net environment stiffness K * sum(s_i * n_i n_i^T), scale factors included"""
    if not len(contacts):
        return StiffnessMatrix(np.zeros((3, 3)))
    entries = contacts.stiffness * np.einsum("i,ij,ik->jk", contacts.scales,
                                             contacts.normals, contacts.normals)
    return StiffnessMatrix(0.5 * (entries + entries.T))


def net_stiffness_diagonal(contacts: ContactSet) -> np.ndarray:
    """diag of equivalent_stiffness without building the matrix"""
    if not len(contacts):
        return np.zeros(3)
    return contacts.stiffness * (contacts.scales @ (contacts.normals ** 2))


def spring_energy(contacts: ContactSet) -> float:
    if not len(contacts):
        return 0.0
    return float(0.5 * contacts.stiffness * np.sum(contacts.scales * contacts.depths ** 2))


def default_metric_weight(positions: np.ndarray, fallback: float = 1.0) -> float:
    """c = 1 / L^2 with L the bounding-box diagonal of the given positions"""
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    if positions.shape[0] < 2:
        return fallback
    diagonal = float(np.linalg.norm(positions.max(axis=0) - positions.min(axis=0)))
    if diagonal < 1e-12:
        return fallback
    return 1.0 / diagonal ** 2


def load_contact_set(path: str) -> ContactSet:
    with open(path, "r", encoding="utf-8") as f:
        return ContactSet.loads(f.read())


def contact_summary(contacts: ContactSet, k_max: Optional[float] = None) -> dict:
    """Small dict used by diagnostics blocks and CLI output"""
    diag = net_stiffness_diagonal(contacts)
    summary = {"count": len(contacts), "net_stiffness_diagonal": diag.tolist()}
    if k_max is not None:
        summary["within_bound"] = bool(np.all(diag <= k_max + 1e-9))
    return summary


def contact_set_json(contacts: ContactSet, indent: Optional[int] = None) -> str:
    if indent is None:
        return contacts.dumps()
    return json.dumps(json.loads(contacts.dumps()), indent=indent)
