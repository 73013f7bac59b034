import json
from pathlib import Path

import numpy as np
import pytest

from app.lib.collision import BoxShape, Pose, slab
from app.lib.contacts import ContactSet

ROOT = Path(__file__).resolve().parents[1]
CONFIG_DIR = ROOT / "configs"


def make_contacts(positions, normals, depths=None, stiffness=1000.0, scales=None) -> ContactSet:
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    normals = np.broadcast_to(np.asarray(normals, dtype=float), positions.shape)
    n = positions.shape[0]
    depths = np.full(n, 1e-3) if depths is None else depths
    scales = np.ones(n) if scales is None else scales
    return ContactSet(positions, normals, depths, scales, stiffness)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def random_contacts(rng):
    normals = rng.normal(size=(40, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return ContactSet(rng.uniform(-0.1, 0.1, (40, 3)), normals, rng.uniform(0.0, 1e-3, 40),
                      rng.uniform(0.0, 1.0, 40), 1e4)


@pytest.fixture
def cube():
    return BoxShape((0.05, 0.05, 0.05))


@pytest.fixture
def resting_pose():
    """Cube centre 1 mm too low over a z = 0 floor"""
    return Pose((0.0, 0.0, 0.049), (1.0, 0.0, 0.0, 0.0))


@pytest.fixture
def floor():
    return [slab(0, 0.0)]


@pytest.fixture
def write_config(tmp_path):
    def _write(document, name="scene.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path
    return _write
