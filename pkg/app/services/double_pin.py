"""
Double-pin scene - contact counts of a two-pin cluster over a two-bore plate

Only the contact-count topology matters here: the same physical overlap
yields a different number of contacts depending on pose, and a tilted
cluster needs six.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from ..lib.collision import ConvexPiece, CylinderShape, PieceBatch, Pose, box_piece, generate_contacts
from ..models.schema import DoublePinSceneSettings

logger = logging.getLogger(__name__)

PLATE_HALF_X = 0.06
PLATE_HALF_Y = 0.03
PLATE_THICKNESS = 0.01
SEATED_DEPTH = 3e-4
SIX_CONTACT_MINIMUM = 6


@dataclass(frozen=True)
class ClusterPose:
    """Cluster frame at the midpoint between the two lower cap centres"""

    offset: Tuple[float, float, float]
    tilt_deg: float = 0.0

    def pose(self) -> Pose:
        return Pose.from_rotation(self.offset, Rotation.from_euler("x", self.tilt_deg, degrees=True))


# separated: 10 mm above the plate; aligned: centred and seated 0.3 mm;
# tilted: shifted 2 mm in +x and tilted 2 degrees about the pin-spacing axis
SCRIPTED_POSES: Dict[str, ClusterPose] = {
    "separated": ClusterPose((0.0, 0.0, 0.01)),
    "aligned": ClusterPose((0.0, 0.0, -SEATED_DEPTH)),
    "tilted": ClusterPose((0.002, 0.0, -SEATED_DEPTH), tilt_deg=2.0),
}


@dataclass(frozen=True, eq=False)
class DoublePinScene:
    settings: DoublePinSceneSettings
    pin: CylinderShape
    pieces: List[ConvexPiece]
    batch: PieceBatch

    @property
    def pin_offsets(self) -> List[np.ndarray]:
        """Pin centres in the cluster frame"""
        half = 0.5 * self.settings.bore_spacing
        h = self.settings.pin_half_height
        return [np.array([-half, 0.0, h]), np.array([half, 0.0, h])]

    def pin_poses(self, cluster: Pose) -> List[Pose]:
        rotation = cluster.rotation
        return [Pose.from_rotation(cluster.position + rotation.apply(offset), rotation)
                for offset in self.pin_offsets]

    def count_contacts(self, cluster: Pose, stiffness: float = 1.0) -> int:
        return sum(len(generate_contacts(self.pin, pose, self.batch, stiffness))
                   for pose in self.pin_poses(cluster))


def plate_pieces(settings: DoublePinSceneSettings) -> List[ConvexPiece]:
    """
    Plate with two rectangular bores at x = +/- spacing/2, as 7 box pieces

    Left outer, middle and right outer blocks span the full plate depth in y;
    each bore is closed in y by a front and a back block. Top faces and bore
    walls are contact faces, every other face is internal.
    """
    half = 0.5 * settings.bore_spacing
    wx, wy = settings.bore_half_width_x, settings.bore_half_width_y
    bottom = -PLATE_THICKNESS
    pieces = [
        box_piece(0, (-PLATE_HALF_X, -PLATE_HALF_Y, bottom), (-half - wx, PLATE_HALF_Y, 0.0), ("+z", "+x")),
        box_piece(1, (-half + wx, -PLATE_HALF_Y, bottom), (half - wx, PLATE_HALF_Y, 0.0), ("+z", "-x", "+x")),
        box_piece(2, (half + wx, -PLATE_HALF_Y, bottom), (PLATE_HALF_X, PLATE_HALF_Y, 0.0), ("+z", "-x")),
    ]
    for centre in (-half, half):
        pieces.append(box_piece(len(pieces), (centre - wx, wy, bottom), (centre + wx, PLATE_HALF_Y, 0.0), ("+z", "-y")))
        pieces.append(box_piece(len(pieces), (centre - wx, -PLATE_HALF_Y, bottom), (centre + wx, -wy, 0.0), ("+z", "+y")))
    return pieces


def build_double_pin(settings: DoublePinSceneSettings) -> DoublePinScene:
    pin = CylinderShape(settings.pin_radius, settings.pin_half_height, settings.rim_samples)
    pieces = plate_pieces(settings)
    return DoublePinScene(settings, pin, pieces, PieceBatch(pieces))


def count_peg_contact_configs(scene: DoublePinScene,
                              poses: Optional[Mapping[str, ClusterPose]] = None) -> Dict[str, int]:
    """
    Contact count of the cluster at every scripted pose

    Returns:
        pose name -> number of generated contacts, in the order given
    """
    poses = SCRIPTED_POSES if poses is None else poses
    counts = {name: scene.count_contacts(pose.pose()) for name, pose in poses.items()}
    logger.info("double-pin contact counts: %s", counts)
    return counts


def requires_six_contacts(counts: Mapping[str, int]) -> bool:
    return max(counts.values(), default=0) >= SIX_CONTACT_MINIMUM
