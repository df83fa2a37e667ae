import math

import numpy as np
import pytest

from synloco.muscle import (
    MuscleParams,
    MuscleSet,
    MuscleState,
    activation_step,
    force_length,
    force_velocity,
    joint_moments,
    muscle_force,
    passive_force,
)

PARAMS = MuscleParams("test", max_isometric_force=1000.0, optimal_fiber_length=0.1,
                      max_contraction_velocity=10.0, tau_act=0.01, tau_deact=0.04,
                      moment_arms={"knee": 0.04})


# ---------------------------------------------------------------------------
# activation dynamics
# ---------------------------------------------------------------------------

def test_activation_fixed_point():
    assert activation_step(0.5, 0.5, 0.001, PARAMS) == 0.5


def test_activation_full_step_clamps():
    # Euler with dt = tau_act overshoots to exactly u and is clamped at 1.
    assert activation_step(1.0, 0.0, 0.01, PARAMS) == 1.0


def test_deactivation_euler_value():
    # a + dt*(0 - 1)/tau_deact = 1 - 0.004/0.04 = 0.9
    assert abs(activation_step(0.0, 1.0, 0.004, PARAMS) - 0.9) < 1e-12


def test_substepped_rise_matches_exponential():
    # dt = tau/100; compare with 1 - exp(-t/tau) at t = tau, 2tau, 3tau.
    tau = PARAMS.tau_act
    dt = tau / 100.0
    a = 0.0
    for step in range(1, 301):
        a = activation_step(1.0, a, dt, PARAMS)
        t = step * dt
        for mult in (1, 2, 3):
            if abs(t - mult * tau) < dt / 2:
                exact = 1.0 - math.exp(-t / tau)
                assert abs(a - exact) <= 0.01 * exact


def test_activation_bounded_for_any_excitation_sequence():
    rng = np.random.default_rng(0)
    dt = min(PARAMS.tau_act, PARAMS.tau_deact) / 2.0
    a = rng.uniform(0.0, 1.0)
    for u in rng.uniform(0.0, 1.0, 2000):
        a = activation_step(u, a, dt, PARAMS)
        assert 0.0 <= a <= 1.0


def test_activation_vectorized():
    u = np.array([1.0, 0.0])
    a = np.array([0.0, 1.0])
    out = activation_step(u, a, 0.004, PARAMS)
    assert out.shape == (2,)
    assert abs(out[1] - 0.9) < 1e-12


# ---------------------------------------------------------------------------
# force components
# ---------------------------------------------------------------------------

def test_passive_only_at_optimal_length_is_zero():
    state = MuscleState(activation=0.0, fiber_length_norm=1.0)
    assert muscle_force(state, 0.0, PARAMS) == 0.0


def test_isometric_maximum():
    state = MuscleState(activation=1.0, fiber_length_norm=1.0, fiber_velocity_norm=0.0)
    assert abs(muscle_force(state, 1.0, PARAMS) - PARAMS.max_isometric_force) < 1e-9


def test_force_at_max_shortening():
    # Hill hyperbola evaluated at v = v_max gives 0; spec bound is 5%.
    state = MuscleState(activation=1.0, fiber_length_norm=1.0,
                        fiber_velocity_norm=PARAMS.max_contraction_velocity)
    assert muscle_force(state, 1.0, PARAMS) <= 0.05 * PARAMS.max_isometric_force


def test_force_velocity_shape():
    assert force_velocity(0.0) == 1.0
    assert force_velocity(1.0) == 0.0
    assert force_velocity(2.0) == 0.0         # clamped past v_max
    assert 1.0 < force_velocity(-0.3) <= 1.8
    assert abs(force_velocity(-5.0) - 1.8) < 0.05


def test_force_length_shape():
    assert force_length(1.0) == 1.0
    assert force_length(0.55) == pytest.approx(math.exp(-1.0))
    assert force_length(1.45) == pytest.approx(math.exp(-1.0))


def test_passive_curve():
    assert passive_force(0.8) == 0.0
    assert passive_force(1.0) == 0.0
    assert passive_force(1.6) == pytest.approx(1.0)
    assert 0.0 < passive_force(1.2) < 1.0


def test_force_monotone_in_activation():
    state = MuscleState(activation=0.0, fiber_length_norm=1.1, fiber_velocity_norm=-1.0)
    forces = [muscle_force(state, a, PARAMS) for a in np.linspace(0, 1, 11)]
    assert all(b >= a for a, b in zip(forces, forces[1:]))
    assert all(f >= 0 for f in forces)


def test_force_never_negative():
    rng = np.random.default_rng(4)
    for _ in range(500):
        state = MuscleState(activation=rng.uniform(0, 1),
                            fiber_length_norm=rng.uniform(0.4, 1.8),
                            fiber_velocity_norm=rng.uniform(-15, 15))
        assert muscle_force(state, state.activation, PARAMS) >= 0.0


# ---------------------------------------------------------------------------
# joint moments
# ---------------------------------------------------------------------------

def two_muscle_set():
    flexor = MuscleParams("flexor", 500.0, 0.1, moment_arms={"knee": 0.05})
    extensor = MuscleParams("extensor", 500.0, 0.1, moment_arms={"knee": -0.05})
    return MuscleSet([flexor, extensor], ["knee"])


def test_zero_forces_zero_moments():
    ms = two_muscle_set()
    assert joint_moments([0.0, 0.0], ms.muscles, ms.joint_names) == {"knee": 0.0}


def test_single_muscle_moment():
    muscle = MuscleParams("m", 500.0, 0.1, moment_arms={"knee": 0.05})
    moments = joint_moments([100.0], [muscle], ["knee"])
    assert moments["knee"] == pytest.approx(5.0)


def test_antagonist_pair_cancels():
    ms = two_muscle_set()
    moments = joint_moments([250.0, 250.0], ms.muscles, ms.joint_names)
    assert moments["knee"] == pytest.approx(0.0)


def test_arms_matrix_layout():
    biarticular = MuscleParams("ham", 1000.0, 0.1,
                               moment_arms={"hip": -0.06, "knee": -0.03})
    ms = MuscleSet([biarticular], ["hip", "knee"])
    np.testing.assert_allclose(ms.arms_matrix(), [[-0.06, -0.03]])


def test_negative_force_rejected():
    ms = two_muscle_set()
    with pytest.raises(ValueError):
        joint_moments([-1.0, 0.0], ms.muscles, ms.joint_names)
