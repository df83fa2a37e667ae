import math

import numpy as np
import pytest

from synloco.env import (
    BipedEnv,
    ModelConfig,
    PlanarBiped,
    TerrainSpec,
    Tile,
    constant_slope_terrain,
    flat_terrain,
    generate_terrain,
    load_model,
)
from synloco.env.physics import Ground, advance, mechanical_energy
from synloco.muscle import MuscleState, muscle_force
from synloco.synergy import SynergyBasis


def make_basis(k=10, seed=0):
    rng = np.random.default_rng(seed)
    H = rng.uniform(0.0, 1.0, (k, 8))
    H /= H.max(axis=1, keepdims=True)
    names = [m["name"] for m in load_model(None)["leg_muscles"]]
    return SynergyBasis(W=np.zeros((2, k)), H=H, k=k, muscle_names=names)


@pytest.fixture(scope="module")
def env_independent():
    return BipedEnv(mode="independent", seed=0)


# ---------------------------------------------------------------------------
# terrain
# ---------------------------------------------------------------------------

def test_zero_slope_range_gives_flat_terrain():
    spec = generate_terrain(seed=1, n_tiles=50, slope_range_deg=(0.0, 0.0))
    assert np.all(spec.pitches_deg() == 0.0)


def test_terrain_deterministic_per_seed():
    a = generate_terrain(seed=9, n_tiles=100)
    b = generate_terrain(seed=9, n_tiles=100)
    np.testing.assert_array_equal(a.pitches_deg(), b.pitches_deg())


def test_terrain_10000_tiles_uniform_stats():
    spec = generate_terrain(seed=123, n_tiles=10_000, slope_range_deg=(-6.0, 6.0))
    pitches = spec.pitches_deg()
    assert pitches.min() >= -6.0
    assert pitches.max() <= 6.0
    assert abs(pitches.mean()) < 0.2


def test_terrain_polyline_is_continuous():
    spec = generate_terrain(seed=3, n_tiles=200)
    xs, ys = spec.polyline()
    assert np.all(np.diff(xs) > 0)
    for tile, (y0, y1, x0, x1) in enumerate(zip(ys[1:-2], ys[2:-1],
                                                xs[1:-2], xs[2:-1])):
        slope = math.degrees(math.atan2(y1 - y0, x1 - x0))
        assert slope == pytest.approx(spec.tiles[tile].pitch_deg, abs=1e-9)


def test_terrain_rejects_empty_and_bad_range():
    with pytest.raises(ValueError):
        generate_terrain(seed=0, n_tiles=0)
    with pytest.raises(ValueError):
        generate_terrain(seed=0, n_tiles=5, slope_range_deg=(-95.0, 0.0))
    with pytest.raises(ValueError):
        TerrainSpec([Tile(120.0)])


def test_constant_slope_height():
    spec = constant_slope_terrain(5.0, n_tiles=10)
    assert spec.height_at(2.0) == pytest.approx(2.0 * math.tan(math.radians(5.0)))
    assert spec.height_at(-10.0) == 0.0


# ---------------------------------------------------------------------------
# reset
# ---------------------------------------------------------------------------

def test_reset_deterministic():
    env_a = BipedEnv(mode="independent", seed=17)
    env_b = BipedEnv(mode="independent", seed=17)
    obs_a, _ = env_a.reset()
    obs_b, _ = env_b.reset()
    np.testing.assert_array_equal(obs_a, obs_b)
    obs_c, _ = env_a.reset(seed=18)
    assert not np.array_equal(obs_a, obs_c)


def test_reset_grf_matches_body_weight(env_independent):
    _, info = env_independent.reset()
    total_vertical = info["grf"][:, 1].sum()
    assert abs(total_vertical - env_independent.body_weight) \
        <= 0.05 * env_independent.body_weight


def test_reset_reports_target_speed(env_independent):
    obs, _ = env_independent.reset(target_speed=1.2)
    assert obs[-1] == 1.2
    obs, _ = env_independent.reset(target_speed=0.7)
    assert obs[-1] == 0.7


# ---------------------------------------------------------------------------
# apply_action / mirroring
# ---------------------------------------------------------------------------

def test_mirror_swaps_leg_blocks():
    env = BipedEnv(mode="synergy", basis=make_basis(), seed=0)
    env.reset()
    rng = np.random.default_rng(0)
    action = rng.uniform(0, 1, env.action_size)
    exc0 = env.apply_action(action, mirror_phase=0)
    exc1 = env.apply_action(action, mirror_phase=1)
    n = env.n_leg
    np.testing.assert_array_equal(exc1[:n], exc0[n:])
    np.testing.assert_array_equal(exc1[n:], exc0[:n])


def test_symmetric_action_invariant_under_mirror():
    env = BipedEnv(mode="synergy", basis=make_basis(), seed=0)
    env.reset()
    rng = np.random.default_rng(1)
    half = rng.uniform(0, 1, env.k)
    trunk = rng.uniform(0, 1, env.n_trunk)
    action = np.concatenate([half, half, trunk])
    np.testing.assert_array_equal(env.apply_action(action, 0),
                                  env.apply_action(action, 1))


def test_mirror_involution():
    env = BipedEnv(mode="synergy", basis=make_basis(), seed=0)
    env.reset()
    rng = np.random.default_rng(2)
    action = rng.uniform(0, 1, env.action_size)
    swapped = action.copy()
    swapped[:env.k], swapped[env.k:2 * env.k] = \
        action[env.k:2 * env.k].copy(), action[:env.k].copy()
    swapped_twice = swapped.copy()
    swapped_twice[:env.k], swapped_twice[env.k:2 * env.k] = \
        swapped[env.k:2 * env.k].copy(), swapped[:env.k].copy()
    np.testing.assert_array_equal(env.apply_action(swapped_twice, 0),
                                  env.apply_action(action, 0))


def test_independent_mode_passthrough(env_independent):
    env_independent.reset()
    rng = np.random.default_rng(3)
    v = rng.uniform(-0.5, 1.5, env_independent.action_size)
    exc = env_independent.apply_action(v, mirror_phase=0)
    expected = np.clip(v[:2 * env_independent.k], 0.0, 1.0)
    np.testing.assert_array_equal(exc, expected)


def test_action_dimension_checked(env_independent):
    env_independent.reset()
    with pytest.raises(ValueError):
        env_independent.step(np.zeros(env_independent.action_size + 1))


def test_synergy_action_dimension_is_2k_plus_t():
    env = BipedEnv(mode="synergy", basis=make_basis(k=10), seed=0)
    assert env.action_size == 2 * 10 + env.n_trunk


# ---------------------------------------------------------------------------
# step contracts
# ---------------------------------------------------------------------------

def test_episode_truncates_at_1000_steps():
    config = ModelConfig(fall_pelvis_fraction=0.0, fall_head_pitch_deg=1e9)
    env = BipedEnv(config=config, mode="independent", seed=0)
    env.reset()
    action = np.zeros(env.action_size)
    terminated = truncated = False
    steps = 0
    while not (terminated or truncated):
        _, _, terminated, truncated, info = env.step(action)
        steps += 1
    assert steps == 1000
    assert truncated and not terminated
    assert info["sim_time"] == pytest.approx(25.0)


def test_zero_action_collapse_within_2s(env_independent):
    env_independent.reset()
    action = np.zeros(env_independent.action_size)
    for step in range(1, 81):
        _, _, terminated, _, _ = env_independent.step(action)
        if terminated:
            break
    assert terminated
    assert step / 40.0 <= 2.0


def test_observation_dimension_constant(env_independent):
    obs, _ = env_independent.reset()
    dim = obs.size
    assert dim == env_independent.observation_size
    rng = np.random.default_rng(4)
    for _ in range(10):
        obs, _, terminated, truncated, _ = env_independent.step(
            rng.uniform(0, 1, env_independent.action_size))
        assert obs.size == dim
        if terminated or truncated:
            break


def test_base_translation_entries_zero(env_independent):
    obs, _ = env_independent.reset()
    ix, iy = env_independent.base_translation_indices()
    rng = np.random.default_rng(5)
    assert obs[ix] == 0.0 and obs[iy] == 0.0
    for _ in range(20):
        obs, _, terminated, truncated, _ = env_independent.step(
            rng.uniform(0, 1, env_independent.action_size))
        assert obs[ix] == 0.0 and obs[iy] == 0.0
        if terminated or truncated:
            break


def test_trajectory_bitwise_deterministic():
    rng = np.random.default_rng(6)
    actions = rng.uniform(0, 1, (30, 18))
    results = []
    for _ in range(2):
        env = BipedEnv(mode="independent", seed=11)
        obs, _ = env.reset(target_speed=1.0)
        trace = [obs]
        for action in actions:
            obs, rb, terminated, truncated, _ = env.step(action)
            trace.append(obs)
            if terminated or truncated:
                break
        results.append(np.vstack(trace))
    np.testing.assert_array_equal(results[0], results[1])


def test_mirror_phase_toggles_on_heel_strike(env_independent):
    # Drive extensors hard enough to bounce and generate heel contacts.
    env_independent.reset()
    action = np.zeros(env_independent.action_size)
    action[1] = action[4] = action[6] = 1.0           # glutei, vasti, soleus (right)
    action[9] = action[12] = action[14] = 1.0         # same on the left
    phases = [env_independent.state.mirror_phase]
    strikes = 0
    for _ in range(120):
        _, _, terminated, truncated, info = env_independent.step(action)
        phases.append(env_independent.state.mirror_phase)
        if info["heel_strike_r"] or info["heel_strike_l"]:
            strikes += 1
        if terminated or truncated:
            break
    if strikes:
        assert len(set(phases)) == 2


# ---------------------------------------------------------------------------
# detect_fall
# ---------------------------------------------------------------------------

def test_fall_detection_thresholds(env_independent):
    env = env_independent
    env.reset()
    assert not env.detect_fall()

    saved = env.state.pos.copy()
    # pelvis dropped to ground level
    env.state.pos[:, 1] -= env._standing_clearance
    assert env.detect_fall()
    env.state.pos[:] = saved

    # pelvis exactly at the threshold: strict inequality, not a fall
    drop = env._standing_clearance * (1.0 - env.config.fall_pelvis_fraction)
    env.state.pos[:, 1] -= drop
    pelvis = env.biped.anchor_world(env.state.pos, "trunk", "hip")
    height = pelvis[1] - env.terrain.height_at(pelvis[0])
    assert height == pytest.approx(
        env.config.fall_pelvis_fraction * env._standing_clearance)
    assert not env.detect_fall()
    env.state.pos[:] = saved

    env.state.pos[env.biped.seg("trunk"), 2] = math.radians(61.0)
    assert env.detect_fall()
    env.state.pos[:] = saved


# ---------------------------------------------------------------------------
# physics-level invariants
# ---------------------------------------------------------------------------

def passive_airborne_biped():
    model = load_model(None)
    for joint in model["joints"]:
        joint["damping"] = 0.0
        joint["limit_stiffness"] = 0.0
        joint["limit_damping"] = 0.0
    for muscle in model["leg_muscles"]:
        muscle["max_isometric_force"] = 1e-12
    return PlanarBiped(model)


def test_energy_drift_below_one_percent_per_second():
    biped = passive_airborne_biped()
    terrain = flat_terrain()
    pos = biped.standing_pose(terrain, 0.0)
    pos[:, 1] += 9.0                        # airborne for the whole window
    rng = np.random.default_rng(0)
    vel = biped.velocity_from_joint_rates(
        pos, trunk_velocity=(0.3, 0.2), trunk_omega=0.5,
        rates=rng.uniform(-2.0, 2.0, 6))

    xs, ys = terrain.polyline()
    ground = Ground(xs=xs, ys=ys)
    act = np.zeros(16)
    exc = np.zeros(16)
    trunk_u = np.zeros(2)
    heel_prev = np.zeros(2)
    grf = np.zeros((2, 2))
    crossings = np.zeros(2, dtype=np.int64)
    om = np.zeros((16, 3))
    omo = np.zeros(6)

    e0 = mechanical_energy(pos, vel, biped.bodies, biped.gravity)
    com0 = biped.com_position(pos)[1]
    diverged = advance(pos, vel, act, exc, trunk_u, 1000, 1e-3, biped.gravity,
                       biped.bodies, biped.joints, biped.muscles,
                       biped.actuators, biped.contacts, ground, heel_prev,
                       grf, crossings, om, omo)
    assert diverged == 0
    assert grf.sum() == 0.0                 # never touched the ground
    e1 = mechanical_energy(pos, vel, biped.bodies, biped.gravity)
    com1 = biped.com_position(pos)[1]
    exchanged = biped.total_mass * biped.gravity * abs(com1 - com0)
    assert abs(e1 - e0) < 0.01 * exchanged


def test_kernel_muscle_forces_match_reference_model(env_independent):
    # One near-zero-length substep leaves the state unchanged, so the kernel's
    # reported fiber state and force must match the reference Hill model.
    env = env_independent
    env.reset()
    rng = np.random.default_rng(8)
    for _ in range(5):
        env.step(rng.uniform(0, 1, env.action_size))
    state = env.state
    xs, ys = env.terrain.polyline()
    grf = np.zeros((2, 2))
    crossings = np.zeros(2, dtype=np.int64)
    out_muscle = np.zeros((16, 3))
    out_moments = np.zeros(6)
    act = state.activations.copy()
    advance(state.pos.copy(), state.vel.copy(), act,
            env._last_excitations.copy(), env._last_trunk.copy(), 1, 1e-12,
            env.biped.gravity, env.biped.bodies, env.biped.joints,
            env.biped.muscles, env.biped.actuators, env.biped.contacts,
            Ground(xs=xs, ys=ys), state.heel_force.copy(), grf, crossings,
            out_muscle, out_moments)
    for i, params in enumerate(env.biped.muscle_set.muscles):
        ref = muscle_force(
            MuscleState(activation=float(act[i]),
                        fiber_length_norm=float(out_muscle[i, 0]),
                        fiber_velocity_norm=float(out_muscle[i, 1])),
            float(act[i]), params)
        assert ref == pytest.approx(out_muscle[i, 2], rel=1e-9, abs=1e-9)
