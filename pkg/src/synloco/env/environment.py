"""The muscle-driven planar biped environment.

Control runs at 40 Hz over 1000-step (25 s) episodes; each control step
advances the physics by a fixed number of 1 kHz substeps. Actions are either
synergy activations (two per-leg blocks expanded through a fixed basis H plus
direct trunk activations) or raw per-muscle excitations in the independent
baseline mode. A phase flag toggles on heel-strike events (heel contact force
crossing 15 N upward, either foot) and swaps the left/right action blocks, so
one half-gait-cycle policy drives both legs symmetrically.

Observations are a fixed-layout float vector; the base translational entries
inside the joint-angle block are always zero so the policy cannot key on
absolute position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from ..reward import RewardBreakdown, RewardParams, RewardWeights, total_reward
from ..synergy import SynergyBasis, expand_synergy, project_basis
from .biped import ModelConfig, PlanarBiped, load_model
from .physics import Ground, advance, joint_angles, joint_rates
from .terrain import TerrainSpec, flat_terrain

CONTROLLER_MODES = ("synergy", "independent")
HEEL_STRIKE_THRESHOLD_N = 15.0


@dataclass
class EnvState:
    """Complete mechanical and muscular state plus episode bookkeeping."""

    pos: np.ndarray                 # (n_bodies, 3): x, y, theta
    vel: np.ndarray                 # (n_bodies, 3)
    activations: np.ndarray         # (n_muscles,)
    mirror_phase: int = 0
    step: int = 0
    target_speed: float = 1.2
    heel_force: np.ndarray = field(default_factory=lambda: np.zeros(2))
    terrain_tile: int = 0

    def copy(self) -> "EnvState":
        return EnvState(self.pos.copy(), self.vel.copy(), self.activations.copy(),
                        self.mirror_phase, self.step, self.target_speed,
                        self.heel_force.copy(), self.terrain_tile)


def prepare_basis(basis: SynergyBasis, biped: PlanarBiped) -> SynergyBasis:
    """Adapt a basis to the model's per-leg muscle set.

    A basis already expressed on the model's leg muscles passes through;
    otherwise its columns are aggregated via the model's muscle_map.
    """
    if list(basis.muscle_names) == biped.leg_muscle_names:
        return basis
    return project_basis(basis, biped.muscle_map, biped.leg_muscle_names)


class BipedEnv:
    """Gym-style environment (reset/step) without the gym dependency."""

    def __init__(self, config: ModelConfig | None = None, mode: str = "synergy",
                 basis: SynergyBasis | None = None,
                 terrain: TerrainSpec | None = None,
                 reward_weights: RewardWeights | None = None,
                 reward_params: RewardParams | None = None,
                 seed: int = 0):
        if mode not in CONTROLLER_MODES:
            raise ValueError(f"mode must be one of {CONTROLLER_MODES}, got {mode!r}")
        self.config = config or ModelConfig()
        self.biped = PlanarBiped(load_model(self.config.model_path))
        self.mode = mode
        self.reward_weights = reward_weights or RewardWeights()
        self.reward_params = reward_params or RewardParams()
        self._default_terrain = terrain or flat_terrain()
        self._seed = seed

        if mode == "synergy":
            if basis is None:
                raise ValueError("synergy mode needs a SynergyBasis")
            self.basis = prepare_basis(basis, self.biped)
            self.k = self.basis.k
        else:
            self.basis = None
            self.k = self.biped.n_leg_muscles

        self.n_leg = self.biped.n_leg_muscles
        self.n_trunk = self.biped.n_trunk
        self.state: EnvState | None = None
        self.terrain = self._default_terrain
        self._standing_clearance = None
        self._last_grf = np.zeros((2, 2))
        self._last_excitations = np.zeros(self.biped.n_muscles)
        self._last_trunk = np.zeros(self.n_trunk)
        self._last_muscle = np.zeros((self.biped.n_muscles, 3))
        self._last_moments = np.zeros(len(self.biped.joint_names))
        self._last_events = np.zeros(2, dtype=np.int64)
        self._done = True

    # -- sizes and layout ---------------------------------------------------

    @property
    def action_size(self) -> int:
        return 2 * self.k + self.n_trunk

    @property
    def observation_size(self) -> int:
        return len(self.observation_labels())

    def observation_labels(self):
        names = self.biped.muscle_set.names
        labels = []
        labels += [f"fiber_length_{n}" for n in names]
        labels += [f"fiber_velocity_{n}" for n in names]
        labels += [f"muscle_force_{n}" for n in names]
        labels += [f"excitation_{n}" for n in names]
        labels += ["head_quat_w", "head_quat_x", "head_quat_y", "head_quat_z"]
        labels += ["head_omega_x", "head_omega_y", "head_omega_z"]
        labels += ["foot_r_dx", "foot_r_dy", "foot_l_dx", "foot_l_dy"]
        labels += ["base_x", "base_y", "trunk_pitch"]
        labels += [f"angle_{j}" for j in self.biped.joint_names]
        labels += ["base_vx", "base_vy", "trunk_pitch_rate"]
        labels += [f"rate_{j}" for j in self.biped.joint_names]
        labels += [f"activation_{n}" for n in names]
        labels += ["grf_r_ap", "grf_r_vertical", "grf_r_ml",
                   "grf_l_ap", "grf_l_vertical", "grf_l_ml"]
        labels += ["com_vx", "com_vy", "com_vz"]
        labels += ["target_speed"]
        return labels

    def base_translation_indices(self):
        labels = self.observation_labels()
        return (labels.index("base_x"), labels.index("base_y"))

    # -- episode API ----------------------------------------------------------

    def reset(self, target_speed: float = 1.2, terrain: TerrainSpec | None = None,
              seed: int | None = None):
        """Stand the model on the terrain origin and settle it onto the ground."""
        if seed is not None:
            self._seed = seed
        rng = np.random.default_rng(self._seed)
        self.terrain = terrain or self._default_terrain

        # settle the balanced symmetric pose, then seed the perturbation into
        # the velocities (a perturbed pose has no passive static equilibrium)
        pos = self.biped.standing_pose(self.terrain, pelvis_x=0.0)
        grf = self.biped.settle(pos, self.terrain,
                                max_substeps=self.config.settle_substeps,
                                dt=self.config.physics_dt)
        j = self.config.reset_jitter
        vel = self.biped.velocity_from_joint_rates(
            pos,
            trunk_velocity=rng.uniform(-j, j, 2) * 0.5,
            trunk_omega=rng.uniform(-j, j),
            rates=rng.uniform(-j, j, len(self.biped.joint_names)))

        pelvis = self.biped.anchor_world(pos, "trunk", "hip")
        ground_y = self.terrain.height_at(pelvis[0])
        if pelvis[1] <= ground_y:
            raise DataError("initial pose penetrates the terrain")
        self._standing_clearance = pelvis[1] - ground_y

        self.state = EnvState(
            pos=pos, vel=vel,
            activations=np.zeros(self.biped.n_muscles),
            mirror_phase=0, step=0, target_speed=float(target_speed),
            heel_force=grf[:, 1].copy(),
            terrain_tile=self.terrain.tile_index_at(pelvis[0]),
        )
        self._last_grf = grf
        self._last_excitations = np.zeros(self.biped.n_muscles)
        self._last_trunk = np.zeros(self.n_trunk)
        self._last_muscle = self._probe_muscle_outputs()
        self._last_moments = np.zeros(len(self.biped.joint_names))
        self._last_events = np.zeros(2, dtype=np.int64)
        self._done = False
        info = {"grf": grf.copy(), "grf_bw": grf / self.body_weight,
                "standing_clearance": self._standing_clearance}
        return self._observation(), info

    @property
    def body_weight(self) -> float:
        return self.biped.total_mass * self.biped.gravity

    def apply_action(self, action, mirror_phase: int | None = None) -> np.ndarray:
        """Per-muscle excitations for an action under the given phase.

        Synergy mode expands the two leg blocks through H; independent mode
        passes per-muscle excitations straight through. In both modes a set
        mirror phase swaps the right and left leg blocks first. Trunk entries
        are returned separately by _split_action; this method returns the
        muscle excitation vector only.
        """
        if mirror_phase is None:
            mirror_phase = self.state.mirror_phase if self.state else 0
        right, left, trunk = self._split_action(action)
        if mirror_phase:
            right, left = left, right
        if self.mode == "synergy":
            exc_r = expand_synergy(right, self.basis)
            exc_l = expand_synergy(left, self.basis)
        else:
            exc_r = np.clip(right, 0.0, 1.0)
            exc_l = np.clip(left, 0.0, 1.0)
        return np.concatenate([exc_r, exc_l])

    def _split_action(self, action):
        action = np.asarray(action, dtype=float)
        if action.shape != (self.action_size,):
            raise ValueError(
                f"action must have shape ({self.action_size},), got {action.shape}")
        return (action[:self.k], action[self.k:2 * self.k],
                np.clip(action[2 * self.k:], 0.0, 1.0))

    def step(self, action):
        """Advance one control step: returns (obs, RewardBreakdown, terminated,
        truncated, info)."""
        if self.state is None or self._done:
            raise RuntimeError("call reset() before step()")
        state = self.state
        excitations = self.apply_action(action, state.mirror_phase)
        _, _, trunk_u = self._split_action(action)

        xs, ys = self.terrain.polyline()
        grf = np.zeros((2, 2))
        crossings = np.zeros(2, dtype=np.int64)
        out_muscle = np.zeros((self.biped.n_muscles, 3))
        out_moments = np.zeros(len(self.biped.joint_names))
        diverged = advance(
            state.pos, state.vel, state.activations, excitations,
            trunk_u if self.n_trunk else np.zeros(1),
            self.config.physics_substeps, self.config.physics_dt,
            self.biped.gravity, self.biped.bodies, self.biped.joints,
            self.biped.muscles, self.biped.actuators, self.biped.contacts,
            Ground(xs=xs, ys=ys), state.heel_force, grf, crossings,
            out_muscle, out_moments)

        state.step += 1
        if int(crossings.sum()) % 2 == 1:
            state.mirror_phase ^= 1
        pelvis = self.biped.anchor_world(state.pos, "trunk", "hip")
        state.terrain_tile = self.terrain.tile_index_at(pelvis[0])
        self._last_grf = grf
        self._last_excitations = excitations
        self._last_trunk = trunk_u
        self._last_muscle = out_muscle
        self._last_moments = out_moments
        self._last_events = crossings

        fell = bool(diverged) or self.detect_fall()
        truncated = state.step >= self.config.episode_length
        terminated = fell
        self._done = terminated or truncated

        q_deg = np.degrees(joint_angles(state.pos, self.biped.joints))
        jmap = {n: i for i, n in enumerate(self.biped.joint_names)}
        com_v = self.biped.com_velocity(state.vel)
        trunk_idx = self.biped.seg("trunk")
        breakdown = total_reward(
            v_x=float(com_v[0]), v_target=state.target_speed, v_z=0.0,
            omega=(0.0, 0.0, float(state.vel[trunk_idx, 2])),
            activations=np.concatenate([state.activations, trunk_u]),
            theta_knee_r=float(q_deg[jmap["knee_r"]]),
            theta_knee_l=float(q_deg[jmap["knee_l"]]),
            theta_lumbar=float(math.degrees(state.pos[trunk_idx, 2])),
            fell=terminated, weights=self.reward_weights,
            params=self.reward_params)

        info = {
            "sim_time": state.step * self.config.control_dt,
            "grf": grf.copy(),
            "grf_bw": grf / self.body_weight,
            "heel_strike_r": bool(crossings[0]),
            "heel_strike_l": bool(crossings[1]),
            "mirror_phase": state.mirror_phase,
            "joint_angles_deg": q_deg,
            "joint_moments_nm": out_moments.copy(),
            "com_velocity": com_v,
            "diverged": bool(diverged),
            "terrain_tile": state.terrain_tile,
        }
        return self._observation(), breakdown, terminated, truncated, info

    def detect_fall(self) -> bool:
        """Pelvis below the height fraction, or head pitch past the limit.

        A non-positive pelvis fraction disables the height criterion.
        """
        state = self.state
        if self.config.fall_pelvis_fraction > 0.0:
            pelvis = self.biped.anchor_world(state.pos, "trunk", "hip")
            height = pelvis[1] - self.terrain.height_at(pelvis[0])
            if height < self.config.fall_pelvis_fraction * self._standing_clearance:
                return True
        pitch = abs(state.pos[self.biped.seg("trunk"), 2])
        return pitch > math.radians(self.config.fall_head_pitch_deg)

    # -- observation ----------------------------------------------------------

    def _probe_muscle_outputs(self) -> np.ndarray:
        """Muscle kinematics at the current pose (forces with zero activation)."""
        q = joint_angles(self.state.pos, self.biped.joints)
        qd = joint_rates(self.state.vel, self.biped.joints)
        m = self.biped.muscles
        lnorm = 1.0 - (m.arms @ q) / m.lopt
        vshort = (m.arms @ qd) / m.lopt
        out = np.zeros((self.biped.n_muscles, 3))
        out[:, 0] = np.maximum(lnorm, 0.01)
        out[:, 1] = vshort
        return out

    def _observation(self) -> np.ndarray:
        state = self.state
        biped = self.biped
        trunk = biped.seg("trunk")
        pitch = state.pos[trunk, 2]
        pelvis = biped.anchor_world(state.pos, "trunk", "hip")
        ankle_r = biped.anchor_world(state.pos, "foot_r", "ankle")
        ankle_l = biped.anchor_world(state.pos, "foot_l", "ankle")
        q = joint_angles(state.pos, biped.joints)
        qd = joint_rates(state.vel, biped.joints)
        com_v = biped.com_velocity(state.vel)
        grf_bw = self._last_grf / self.body_weight

        parts = [
            self._last_muscle[:, 0],
            self._last_muscle[:, 1],
            self._last_muscle[:, 2] / biped.muscles.fmax,
            self._last_excitations,
            np.array([math.cos(pitch / 2), 0.0, 0.0, math.sin(pitch / 2)]),
            np.array([0.0, 0.0, state.vel[trunk, 2]]),
            ankle_r - pelvis,
            ankle_l - pelvis,
            np.array([0.0, 0.0, pitch]),        # base translation zeroed
            q,
            np.array([state.vel[trunk, 0], state.vel[trunk, 1], state.vel[trunk, 2]]),
            qd,
            state.activations,
            np.array([grf_bw[0, 0], grf_bw[0, 1], 0.0,
                      grf_bw[1, 0], grf_bw[1, 1], 0.0]),
            np.array([com_v[0], com_v[1], 0.0]),
            np.array([state.target_speed]),
        ]
        return np.concatenate(parts)
