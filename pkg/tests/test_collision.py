import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from app.lib.collision import (BoxShape, ConvexPiece, CylinderShape, Halfspace, PieceBatch, Pose, box_piece,
                               generate_contacts, halfspace_piece, incline_frame, incline_strip_count,
                               incline_strips, local_samples, pieces_from_settings, point_vs_piece, sample_points,
                               shape_from_settings, slab)
from app.lib.errors import InvalidParameterError
from app.models.schema import CylinderShapeSettings, InclineStripsSettings, PieceSettings


def test_box_resting_on_floor(cube, resting_pose, floor):
    contacts = generate_contacts(cube, resting_pose, floor, 1e4)
    assert len(contacts) == 4
    np.testing.assert_allclose(contacts.normals, np.tile([0.0, 0.0, 1.0], (4, 1)))
    np.testing.assert_allclose(contacts.depths, 1e-3, rtol=1e-9)
    np.testing.assert_allclose(contacts.positions[:, 2], -1e-3, atol=1e-12)
    assert contacts.stiffness == 1e4


def test_separated_box_has_no_contacts(cube, floor):
    contacts = generate_contacts(cube, Pose((0.0, 0.0, 0.2)), floor, 1e4)
    assert len(contacts) == 0


def test_box_across_two_strips_splits_by_piece(cube, resting_pose):
    pieces = [
        box_piece(1, (0.0, -1.0, -1.0), (1.0, 1.0, 0.0), ("+z",)),
        box_piece(0, (-1.0, -1.0, -1.0), (0.0, 1.0, 0.0), ("+z",)),
    ]
    contacts = generate_contacts(cube, resting_pose, pieces, 1e4)
    assert len(contacts) == 4
    assert np.all(contacts.positions[:2, 0] < 0.0)
    assert np.all(contacts.positions[2:, 0] > 0.0)
    np.testing.assert_allclose(contacts.normals[:, 2], 1.0)


def test_finer_decomposition_generates_more_contacts(cube, resting_pose):
    single = generate_contacts(cube, resting_pose, [slab(0, 0.0, 0.1)], 1.0)
    stacked = generate_contacts(cube, resting_pose, [slab(i, 0.0, 0.1) for i in range(16)], 1.0)
    assert len(single) == 4
    assert len(stacked) == 64


def test_internal_face_never_becomes_contact_face():
    piece = box_piece(0, (-1.0, -1.0, -1.0), (0.0, 1.0, 0.0), ("+z",))
    depth, normal = point_vs_piece((-0.001, 0.0, -0.5), piece)
    assert depth == pytest.approx(0.5)
    np.testing.assert_array_equal(normal, [0.0, 0.0, 1.0])


def test_point_vs_piece_edges():
    piece = box_piece(0, (-1.0, -1.0, -1.0), (1.0, 1.0, 0.0))
    assert point_vs_piece((0.0, 0.0, 0.5), piece) is None
    assert point_vs_piece((0.0, 0.0, 0.0), piece) is None
    # +x is the nearest contact face
    depth, normal = point_vs_piece((0.9, 0.0, -0.1), piece)
    assert depth == pytest.approx(0.1)
    np.testing.assert_array_equal(normal, [1.0, 0.0, 0.0])
    only_internal = ConvexPiece(1, (Halfspace((0.0, 0.0, 1.0), 0.0, internal=True),))
    assert point_vs_piece((0.0, 0.0, -1.0), only_internal) is None


def test_batch_query_matches_point_loop(rng):
    pieces = [
        box_piece(2, (-0.5, -0.5, -0.5), (0.0, 0.5, 0.0), ("+z", "+x")),
        box_piece(0, (0.0, -0.5, -0.5), (0.5, 0.5, 0.0)),
        halfspace_piece(5, (0.0, 0.6, 0.8), 0.1),
        slab(3, 0.05, 0.3),
    ]
    points = rng.uniform(-0.6, 0.6, (200, 3))
    piece_idx, sample_idx, depths, normals = PieceBatch(pieces).query(points)

    expected = []
    for piece in sorted(pieces, key=lambda p: p.id):
        for s, point in enumerate(points):
            hit = point_vs_piece(point, piece)
            if hit is not None:
                expected.append((piece.id, s, hit[0], hit[1]))
    batch = PieceBatch(pieces)
    assert [(int(batch.ids[p]), int(s)) for p, s in zip(piece_idx, sample_idx)] == [(e[0], e[1]) for e in expected]
    np.testing.assert_allclose(depths, [e[2] for e in expected], atol=1e-12)
    np.testing.assert_allclose(normals, [e[3] for e in expected], atol=1e-12)


def test_cylinder_sample_order():
    shape = CylinderShape(0.01, 0.02, rim_samples=8)
    samples = local_samples(shape)
    assert samples.shape == (18, 3)
    np.testing.assert_allclose(samples[:8, 2], -0.02)
    np.testing.assert_allclose(samples[8:16, 2], 0.02)
    np.testing.assert_allclose(samples[16], [0.0, 0.0, -0.02])
    np.testing.assert_allclose(samples[17], [0.0, 0.0, 0.02])
    np.testing.assert_allclose(np.linalg.norm(samples[:16, :2], axis=1), 0.01)
    np.testing.assert_allclose(samples[0], [0.01, 0.0, -0.02])


def test_box_samples_follow_pose(cube):
    rotation = Rotation.from_euler("z", 90.0, degrees=True)
    points = sample_points(cube, Pose.from_rotation((1.0, 2.0, 3.0), rotation))
    assert points.shape == (8, 3)
    np.testing.assert_allclose(points.mean(axis=0), [1.0, 2.0, 3.0], atol=1e-12)
    np.testing.assert_allclose(points[0], [1.05, 1.95, 2.95], atol=1e-12)


def test_inertia():
    np.testing.assert_allclose(BoxShape((0.05, 0.05, 0.05)).inertia(1.0), np.eye(3) * (0.02 / 12.0))
    cyl = CylinderShape(0.1, 0.5).inertia(2.0)
    assert cyl[2, 2] == pytest.approx(0.01)
    assert cyl[0, 0] == pytest.approx(2.0 * (0.03 + 1.0) / 12.0)


@pytest.mark.parametrize("make", [
    lambda: Halfspace((0.0, 0.0, 2.0), 0.0),
    lambda: ConvexPiece(0, ()),
    lambda: box_piece(0, (0.0, 0.0, 0.0), (1.0, 1.0, 0.0)),
    lambda: box_piece(0, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0), ("+w",)),
    lambda: BoxShape((0.1, 0.0, 0.1)),
    lambda: CylinderShape(0.01, 0.02, rim_samples=6),
])
def test_invalid_geometry(make):
    with pytest.raises(InvalidParameterError):
        make()


def test_incline_strip_count():
    assert incline_strip_count(InclineStripsSettings(count=512)) == 128
    assert incline_strip_count(InclineStripsSettings(count=64)) == 16
    assert incline_strip_count(InclineStripsSettings(count=1)) == 1
    assert incline_strip_count(InclineStripsSettings(count=512, length=0.5)) == 50


def test_incline_strips_are_nested():
    settings = InclineStripsSettings(count=64, angle_deg=30.0)
    pieces = incline_strips(settings, first_id=10)
    assert [p.id for p in pieces] == list(range(10, 27))
    down, normal = incline_frame(30.0)
    point = 0.035 * down - 1e-4 * normal
    piece_idx, _, depths, normals = PieceBatch(pieces).query(point[None, :])
    assert piece_idx.tolist() == [0, 1, 2, 3]
    np.testing.assert_allclose(depths, 1e-4, rtol=1e-6)
    np.testing.assert_allclose(normals, np.tile(normal, (4, 1)), atol=1e-12)


def test_incline_budget_caps_box_contacts():
    settings = InclineStripsSettings(count=512, angle_deg=30.0)
    down, normal = incline_frame(30.0)
    rotation = Rotation.from_euler("y", 30.0, degrees=True)
    centre = 2.0 * down + (0.05 - 1e-4) * normal
    contacts = generate_contacts(BoxShape((0.05, 0.05, 0.05)), Pose.from_rotation(centre, rotation),
                                 incline_strips(settings), 1.0)
    assert len(contacts) == 512


def test_settings_builders():
    pieces = pieces_from_settings([PieceSettings(id=3, halfspaces=[{"n": [0, 0, 1], "d": 0.0},
                                                                   {"n": [0, 0, -1], "d": 1.0, "internal": True}])])
    assert pieces[0].id == 3
    assert pieces[0].contact_faces == [0]
    shape = shape_from_settings(CylinderShapeSettings(radius=0.02))
    assert isinstance(shape, CylinderShape) and shape.radius == 0.02


@pytest.mark.parametrize("shift", [(0.3, -0.2, 0.1), (-4.0, 2.5, -1.0), (100.0, 0.0, 0.0)])
def test_contacts_move_with_a_shared_translation(cube, shift):
    shift = np.array(shift)
    tilt = Rotation.from_euler("xy", [10.0, -4.0], degrees=True)

    def scene(offset):
        pieces = [
            box_piece(0, np.array([-1.0, -1.0, -0.5]) + offset, np.array([0.02, 1.0, 0.0]) + offset, ("+z",)),
            box_piece(1, np.array([0.02, -1.0, -0.5]) + offset, np.array([1.0, 1.0, 0.0]) + offset, ("+z",)),
        ]
        return generate_contacts(cube, Pose.from_rotation(np.array([0.0, 0.0, 0.045]) + offset, tilt), pieces, 1e4)

    here, there = scene(np.zeros(3)), scene(shift)
    assert len(here) == len(there) > 0
    np.testing.assert_allclose(there.positions - shift, here.positions, atol=1e-10)
    np.testing.assert_allclose(there.normals, here.normals, atol=1e-12)
    np.testing.assert_allclose(there.depths, here.depths, atol=1e-10)
