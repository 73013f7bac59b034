import numpy as np
import pandas as pd
import pytest

from app.lib.collision import generate_contacts, slab
from app.lib.contacts import ContactPoint, ContactSet
from app.lib.dynamics import (TRAJECTORY_COLUMNS, BodyState, SimConfig, contact_force, contact_forces, contact_wrench,
                              critical_damping, run, scripted_step, step, total_energy)
from app.lib.errors import InvalidParameterError
from app.models.schema import ReductionConfig, SceneConfig, StiffnessBound

STATE_COLUMNS = TRAJECTORY_COLUMNS[:14]
UP = np.array([0.0, 0.0, 1.0])


def cube_state(cube, z, mass=1.0):
    return BodyState.at_rest((0.0, 0.0, z), mass, cube.inertia(mass))


def test_free_fall_step(cube):
    cfg = SimConfig(dt=1e-3, duration=1e-3, energy_guard=None)
    state, diag = step(cube_state(cube, 1.0), cube, [], cfg)
    assert state.linear_velocity[2] == pytest.approx(-9.81e-3)
    assert state.position[2] == pytest.approx(1.0 - 9.81e-6)
    assert diag.n_raw == 0 and diag.n_reduced == 0
    np.testing.assert_array_equal(state.angular_velocity, 0.0)


def test_contact_force_spring_and_damping():
    point = ContactPoint((0.0, 0.0, 0.0), UP, 1e-3)
    np.testing.assert_allclose(contact_force(point, 1e4, 0.0, np.zeros(3), 0.5, 0.3, 1e-3), [0.0, 0.0, 10.0])
    # separating at 0.05 m/s removes half the spring force
    np.testing.assert_allclose(contact_force(point, 1e4, 100.0, 0.05 * UP, 0.5, 0.3, 1e-3), [0.0, 0.0, 5.0])
    # never pulls
    np.testing.assert_allclose(contact_force(point, 1e4, 100.0, 1.0 * UP, 0.5, 0.3, 1e-3), 0.0)
    half = point.with_scale(0.5)
    np.testing.assert_allclose(contact_force(half, 1e4, 0.0, np.zeros(3), 0.5, 0.3, 1e-3), [0.0, 0.0, 5.0])


def test_contact_force_friction_regimes():
    point = ContactPoint((0.0, 0.0, 0.0), UP, 1e-3)
    sliding = contact_force(point, 1e4, 0.0, np.array([1.0, 0.0, 0.0]), 0.5, 0.3, 1e-3)
    np.testing.assert_allclose(sliding, [-3.0, 0.0, 10.0])
    creeping = contact_force(point, 1e4, 0.0, np.array([0.0, 5e-4, 0.0]), 0.5, 0.3, 1e-3)
    np.testing.assert_allclose(creeping, [0.0, -2.5, 10.0])


def test_contact_forces_match_single_contact_response(random_contacts, rng):
    velocities = rng.normal(scale=2e-3, size=(len(random_contacts), 3))
    velocities[::5] = 0.0
    batch = contact_forces(random_contacts.normals, random_contacts.depths, random_contacts.scales,
                           random_contacts.stiffness, 50.0, velocities, 0.35, 0.3, 1e-3)
    assert batch.shape == (len(random_contacts), 3)
    for i, point in enumerate(random_contacts):
        # reference: one contact at a time, written out in scalars
        v_n = float(velocities[i] @ point.normal)
        f_n = max(0.0, point.scale * random_contacts.stiffness * point.depth - 50.0 * v_n)
        slip = velocities[i] - v_n * point.normal
        speed = float(np.linalg.norm(slip))
        expected = f_n * point.normal
        if f_n > 0.0 and speed > 0.0:
            magnitude = 0.35 * f_n * speed / 1e-3 if speed < 1e-3 else 0.3 * f_n
            expected = expected - magnitude * slip / speed
        np.testing.assert_allclose(batch[i], expected, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(
            contact_force(point, random_contacts.stiffness, 50.0, velocities[i], 0.35, 0.3, 1e-3), batch[i],
            rtol=1e-12, atol=1e-12)


def test_contact_forces_empty():
    empty = np.zeros((0, 3))
    assert contact_forces(empty, np.zeros(0), np.zeros(0), 1e4, 0.0, empty, 0.5, 0.3, 1e-3).shape == (0, 3)


def test_contact_wrench_of_resting_box(cube, resting_pose, floor):
    state = cube_state(cube, 0.049)
    contacts = generate_contacts(cube, resting_pose, floor, 1e4)
    force, torque = contact_wrench(state, contacts, SimConfig(stiffness=1e4))
    np.testing.assert_allclose(force, [0.0, 0.0, 40.0], atol=1e-9)
    np.testing.assert_allclose(torque, 0.0, atol=1e-12)


def test_scripted_step_matches_the_free_step(cube, floor):
    state = BodyState((0.01, 0.0, 0.049), (1.0, 0.0, 0.0, 0.0), (0.002, 0.0, -0.01), (0.0, 0.0, 0.0),
                      1.0, cube.inertia(1.0))
    cfg = SimConfig(dt=1e-4, stiffness=1e4, damping=20.0)
    wrench, diag = scripted_step(state, cube, floor, cfg)
    new_state, free_diag = step(state, cube, floor, cfg)
    assert diag.n_raw == free_diag.n_raw == 4
    expected = state.linear_velocity + (wrench[:3] / state.mass + np.array(cfg.gravity)) * cfg.dt
    np.testing.assert_allclose(new_state.linear_velocity, expected, rtol=1e-12, atol=1e-15)
    # the scripted body itself is left where it was
    np.testing.assert_array_equal(state.position, [0.01, 0.0, 0.049])


def test_critical_damping():
    assert critical_damping(1e5, 1.0) == pytest.approx(2.0 * np.sqrt(2.5e4))
    assert critical_damping(1e4, 4.0, reference_contacts=1) == pytest.approx(400.0)


def test_resting_box_is_supported(cube):
    cfg = SimConfig(dt=1e-4, duration=0.2, stiffness=1e5, damping=critical_damping(1e5, 1.0), energy_guard=None)
    trajectory = run(cube_state(cube, 0.05), cube, [slab(0, 0.0)], cfg)
    assert not trajectory.diverged
    assert trajectory.steps == 2000
    final = trajectory.final_state
    # static sag m g / (4 K) per corner
    assert final.position[2] == pytest.approx(0.05 - 9.81 / 4e5, abs=2e-6)
    assert abs(final.linear_velocity[2]) < 1e-3
    assert trajectory.frame["n_raw"].iloc[-1] == 4


def test_energy_is_conserved_without_friction_and_damping(cube):
    floor = [slab(0, 1.0)]
    cfg = SimConfig(dt=1e-4, duration=1.0, mu_s=0.0, mu_k=0.0, stiffness=1e5, damping=0.0,
                    energy_guard=None, record_every=100)
    initial = cube_state(cube, 1.06)
    gravity = cfg.gravity
    start = total_energy(initial, generate_contacts(cube, initial.pose, floor, 1e5), gravity)
    trajectory = run(initial, cube, floor, cfg)
    final = trajectory.final_state
    end = total_energy(final, generate_contacts(cube, final.pose, floor, 1e5), gravity)
    assert trajectory.max_raw_contacts == 4
    assert abs(end - start) / start < 0.01


def test_runs_are_bit_identical(cube):
    cfg = SimConfig(dt=1e-4, duration=0.05, stiffness=1e5, damping=300.0,
                    reduction=ReductionConfig(k=4), stiffness_bound=StiffnessBound(factor=2.0))
    quat = np.array([0.9998, 0.02, 0.0, 0.0])
    tilted = BodyState((0.0, 0.0, 0.051), quat / np.linalg.norm(quat),
                       (0.1, 0.0, -0.2), (0.0, 0.5, 0.0), 1.0, cube.inertia(1.0))
    pieces = [slab(i, 0.0, 0.2) for i in range(3)]
    first = run(tilted, cube, pieces, cfg)
    second = run(tilted, cube, pieces, cfg)
    pd.testing.assert_frame_equal(first.frame[STATE_COLUMNS], second.frame[STATE_COLUMNS], check_exact=True)


def test_reduction_and_bound_apply_every_step(cube):
    pieces = [slab(i, 0.0, 0.2) for i in range(128)]
    cfg = SimConfig(dt=1e-4, duration=0.01, stiffness=1e4, damping=0.0,
                    reduction=ReductionConfig(k=4), stiffness_bound=StiffnessBound(factor=2.0))
    state = cube_state(cube, 0.0495)
    _, diag = step(state, cube, pieces, cfg)
    assert diag.n_raw == 512
    assert diag.n_reduced == 4
    assert diag.net_stiffness[2] == pytest.approx(2e4)

    trajectory = run(state, cube, pieces, cfg)
    assert trajectory.frame["n_raw"].max() == 512
    assert (trajectory.frame[["ke_xx", "ke_yy", "ke_zz"]].to_numpy() <= 2e4 + 1e-9).all()
    assert np.all(trajectory.max_net_stiffness <= 2e4 + 1e-9)


def test_divergence_is_flagged_not_raised(cube):
    cfg = SimConfig(dt=1e-3, duration=0.5, stiffness=1e7, damping=0.0)
    trajectory = run(cube_state(cube, 0.04), cube, [slab(0, 0.0)], cfg)
    assert trajectory.diverged
    assert trajectory.divergence_reason in ("energy blow-up", "non-finite state")
    assert trajectory.diverged_step is not None
    assert trajectory.steps < cfg.steps


def test_trajectory_csv_columns(tmp_path, cube):
    cfg = SimConfig(dt=1e-3, duration=0.01, energy_guard=None, record_every=2)
    trajectory = run(cube_state(cube, 1.0), cube, [slab(0, 0.0)], cfg)
    path = trajectory.write_csv(tmp_path / "out" / "fall.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == TRAJECTORY_COLUMNS
    assert len(frame) == 5
    np.testing.assert_allclose(frame["t"], [0.002, 0.004, 0.006, 0.008, 0.010])
    assert set(trajectory.mean_phase_us()) == {"t_collide_us", "t_reduce_us", "t_qp_us", "t_response_us"}
    copy = trajectory.to_frame()
    copy.loc[:, "pz"] = 0.0
    assert not trajectory.frame["pz"].eq(0.0).all()


@pytest.mark.parametrize("kwargs", [
    {"dt": 0.0},
    {"dt": 1e-3, "duration": 1e-4},
    {"mu_s": 0.2, "mu_k": 0.3},
    {"stick_velocity": 0.0},
    {"record_every": 0},
])
def test_sim_config_validation(kwargs):
    with pytest.raises(InvalidParameterError):
        SimConfig(**kwargs)


def test_sim_config_from_scene_config():
    config = SceneConfig.model_validate({"scene": {"kind": "incline"}, "stiffness_bound": "disabled"})
    cfg = SimConfig.from_config(config, mass=1.0)
    assert cfg.damping == pytest.approx(critical_damping(1e5, 1.0))
    assert cfg.stiffness_bound is None and cfg.k_max is None
    assert cfg.reduction.k == 10
    assert cfg.steps == 30000
    assert SimConfig.from_config(config, 1.0, reduction=None).reduction is None


@pytest.mark.parametrize("kwargs", [
    {"orientation": (1.0, 1.0, 0.0, 0.0)},
    {"mass": 0.0},
    {"inertia": np.diag([1.0, -1.0, 1.0])},
    {"inertia": [[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]},
])
def test_body_state_validation(kwargs):
    fields = {"position": np.zeros(3), "orientation": (1.0, 0.0, 0.0, 0.0), "linear_velocity": np.zeros(3),
              "angular_velocity": np.zeros(3), "mass": 1.0, "inertia": np.eye(3)}
    fields.update(kwargs)
    with pytest.raises(InvalidParameterError):
        BodyState(**fields)


def test_empty_contact_energy_is_mechanical(cube):
    state = BodyState((0.0, 0.0, 2.0), (1.0, 0.0, 0.0, 0.0), (3.0, 0.0, 0.0), (0.0, 0.0, 0.0), 2.0, cube.inertia(2.0))
    assert total_energy(state, ContactSet.empty(1.0), (0.0, 0.0, -10.0)) == pytest.approx(9.0 + 40.0)
