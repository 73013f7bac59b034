import math

import numpy as np
import pytest

from app.lib.control import (ForceLoopState, JointPlant, ParallelController, closed_loop_matrix,
                             computed_torque_plant_step, critically_damped_error, find_stability_split,
                             force_pi_step, parallel_step, stability_margin)
from app.lib.errors import InvalidParameterError

K_PRIME = 1000.0
INNER = {"K": 1e4, "D": 200.0, "dt": 1e-4}


@pytest.mark.parametrize("K, dt", [(1e4, 1e-4), (1e2, 1e-3)])
def test_computed_torque_tracks_critically_damped_error(K, dt):
    e0 = 0.01
    plant = JointPlant.single(K, 2.0 * math.sqrt(K), 1.0, dt)
    steps = int(round(40.0 / math.sqrt(K) / dt))
    errors = np.empty(steps)
    for k in range(steps):
        plant = computed_torque_plant_step(plant, e0, 0.0, 0.0, 3.0)
        errors[k] = e0 - plant.q[0]
    expected = critically_damped_error(e0, K, dt * np.arange(1, steps + 1))
    assert np.sqrt(np.mean((errors - expected) ** 2)) <= 0.01 * e0


def test_plant_validation():
    with pytest.raises(InvalidParameterError):
        JointPlant([1.0], [0.0], [1.0], [0.0], [0.0], 1e-3)
    with pytest.raises(InvalidParameterError):
        JointPlant([1.0, 1.0], [1.0], [1.0], [0.0], [0.0], 1e-3)
    with pytest.raises(InvalidParameterError):
        JointPlant.single(1.0, 1.0, dt=0.0)


def test_critically_damped_closed_form():
    assert critically_damped_error(2.0, 4.0, 0.0) == pytest.approx(2.0)
    assert critically_damped_error(1.0, 4.0, 0.5) == pytest.approx(2.0 * math.exp(-1.0))


def test_force_pi_step():
    loop = ForceLoopState(kp=0.01, ki=0.5, f_limit=10.0)
    u_f, loop = force_pi_step(loop, 5.0, 3.0, 0.1)
    assert loop.integrator == pytest.approx(0.2)
    assert u_f == pytest.approx(0.01 * 2.0 + 0.5 * 0.2)


def test_force_integrator_is_clamped():
    loop = ForceLoopState(kp=0.0, ki=1.0, f_limit=1.0)
    u_f, loop = force_pi_step(loop, 100.0, 0.0, 1.0)
    assert loop.integrator == 1.0 and u_f == 1.0
    u_f, loop = force_pi_step(loop, -100.0, 0.0, 1.0)
    assert loop.integrator == -1.0 and u_f == -1.0


def test_force_loop_validation():
    with pytest.raises(InvalidParameterError):
        force_pi_step(ForceLoopState(0.0, 1.0), 1.0, 0.0, 0.0)
    with pytest.raises(InvalidParameterError):
        ForceLoopState(-1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        ForceLoopState(0.0, 1.0, f_limit=0.0)


def test_parallel_step_adds_feedforward_and_force_offset():
    controller = ParallelController.create(0.001, 0.0, 10.0, (False, False, True, False, False, False),
                                           base=(0.0, 0.0, 0.5, 0.0, 0.0, 0.0))
    v_d = np.array([0.1, 0.0, 0.0, 0.0, 0.0, 0.0])
    f_d = np.array([0.0, 0.0, 5.0, 0.0, 0.0, 0.0])
    for _ in range(10):
        controller = parallel_step(controller, v_d, f_d, np.zeros(6), 0.01)
    np.testing.assert_allclose(controller.commanded, [0.01, 0.0, 0.5 + 0.005, 0.0, 0.0, 0.0])


def test_unmasked_axes_ignore_force_error():
    controller = ParallelController.create(1.0, 1.0, 10.0, (False,) * 6)
    controller = parallel_step(controller, np.zeros(6), np.full(6, 5.0), np.zeros(6), 0.01)
    np.testing.assert_array_equal(controller.commanded, np.zeros(6))


def test_closed_loop_matrix_without_force_gains_is_inner_loop():
    A = closed_loop_matrix(0.0, 0.0, 0.0, 1e4, 200.0, 1e-4)
    assert A.shape == (3, 3)
    np.testing.assert_allclose(A[2], [0.0, 0.0, 1.0])


def test_contact_count_split_for_shipped_gains():
    low = stability_margin(4 * K_PRIME, 0.0, 0.04, **INNER)
    high = stability_margin(6 * K_PRIME, 0.0, 0.04, **INNER)
    assert low < 1.0 < high


def test_radius_grows_with_environment_stiffness():
    radii = [stability_margin(k_e, 0.0, 0.04, **INNER) for k_e in np.linspace(1000.0, 8000.0, 15)]
    assert np.all(np.diff(radii) > 0.0)


def test_free_motion_is_stable():
    assert stability_margin(0.0, 0.0, 0.04, **INNER) < 1.0


def test_find_stability_split():
    split = find_stability_split(K_PRIME, 1e4, 200.0, 1e-4)
    assert split is not None
    assert split.radius_low < 1.0 < split.radius_high
    assert split.margin > 0.0
    assert stability_margin(4 * K_PRIME, 0.0, split.ki, **INNER) == pytest.approx(split.radius_low)


def test_no_split_when_counts_match():
    assert find_stability_split(K_PRIME, 1e4, 200.0, 1e-4, low_count=4, high_count=4, samples=50) is None


def _period(state, K_e, kp, ki, K, D, dt):
    # one control period written out in the documented order, set point 0
    x, v, integral = state
    error = -K_e * x
    integral = integral + dt * error
    x_d = kp * error + ki * integral
    v = v + dt * (K * (x_d - x) - D * v)
    x = x + dt * v
    return x, v, integral


@pytest.mark.parametrize("count", [1, 2, 4, 6, 8, 12])
def test_stability_margin_agrees_with_time_domain(rng, count):
    K_e, kp, ki = count * K_PRIME, 0.0, 0.04
    A = closed_loop_matrix(K_e, kp, ki, **INNER)
    for state in rng.normal(size=(5, 3)):
        np.testing.assert_allclose(_period(tuple(state), K_e, kp, ki, **INNER), A @ state, rtol=1e-12, atol=1e-15)

    radius = stability_margin(K_e, kp, ki, **INNER)
    steps = int(math.ceil(40.0 / abs(math.log(radius))))
    if steps > 200_000:
        return
    state = (1e-3, 0.0, 0.0)
    for _ in range(steps):
        state = _period(state, K_e, kp, ki, **INNER)
    growth = np.linalg.norm(state) / 1e-3
    assert (growth < 1.0) == (radius < 1.0)


def test_parallel_step_is_exactly_additive():
    axes = (True, False, True, False, False, True)
    base = (0.1, -0.2, 0.3, 0.0, 0.0, 0.05)
    v_d = np.array([0.01, 0.02, -0.03, 0.1, 0.0, -0.2])
    f_d = np.array([3.0, 0.0, 7.0, 0.0, 0.0, 1.0])
    f_meas = np.array([1.0, 5.0, 2.0, 0.0, 0.0, 0.5])
    both = feedforward = force = ParallelController.create(0.002, 0.3, 10.0, axes, base=base)
    for _ in range(50):
        both = parallel_step(both, v_d, f_d, f_meas, 0.01)
        feedforward = parallel_step(feedforward, v_d, f_meas, f_meas, 0.01)
        force = parallel_step(force, np.zeros(6), f_d, f_meas, 0.01)
    np.testing.assert_array_equal(feedforward.force_offset, 0.0)
    np.testing.assert_array_equal(force.velocity_integral, 0.0)
    np.testing.assert_array_equal(both.commanded, both.base + feedforward.velocity_integral + force.force_offset)
