"""Planar biped construction: model file parsing, pose building, settling.

The model file (JSON) declares seven segments (trunk, thighs, shanks, feet),
six pin joints, one per-leg muscle template instantiated for both sides,
direct torque actuators for the trunk block, and the foot contact spheres.

Sign conventions (counterclockwise positive, x forward, y up; the out-of-plane
axis is mediolateral): hip flexion positive, knee hyperextension positive
(flexion negative), ankle dorsiflexion positive, trunk pitch positive when
leaning backward (extension). All segment angles are zero in the reference
standing pose.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..muscle import MuscleParams, MuscleSet
from .physics import Actuators, Bodies, Contacts, Ground, Joints, advance
from .physics import Muscles as MuscleArrays
from .terrain import TerrainSpec

DEFAULT_MODEL_RESOURCE = "planar_biped.json"


def load_model(path=None) -> dict:
    """Parse a model file; the bundled planar biped when path is None."""
    if path is None:
        source = resources.files("synloco.data").joinpath(DEFAULT_MODEL_RESOURCE)
        return json.loads(source.read_text())
    path = Path(path)
    if not path.exists():
        raise DataError(f"model file not found: {path}")
    with open(path) as fh:
        return json.load(fh)


@dataclass
class ModelConfig:
    """Environment contract: rates, horizon, substepping, fall thresholds."""

    model_path: str | None = None
    control_rate: float = 40.0
    physics_substeps: int = 25
    episode_length: int = 1000
    fall_pelvis_fraction: float = 0.6
    fall_head_pitch_deg: float = 60.0
    reset_jitter: float = 0.1       # seeded velocity perturbation, rad/s and m/s
    settle_substeps: int = 4000

    def __post_init__(self):
        if self.control_rate <= 0 or self.physics_substeps < 1:
            raise ValueError("control_rate and physics_substeps must be positive")
        if self.episode_length < 1:
            raise ValueError("episode_length must be >= 1")

    @property
    def control_dt(self) -> float:
        return 1.0 / self.control_rate

    @property
    def physics_dt(self) -> float:
        return self.control_dt / self.physics_substeps

    @property
    def episode_duration_s(self) -> float:
        return self.episode_length / self.control_rate


class PlanarBiped:
    """Compiled model arrays plus kinematic helpers."""

    def __init__(self, model: dict):
        self.model = model
        self.total_mass = float(model["total_mass_kg"])
        self.gravity = float(model["gravity"])

        segs = model["segments"]
        self.segment_names = [s["name"] for s in segs]
        self._seg_index = {name: i for i, name in enumerate(self.segment_names)}
        mass = np.array([s["mass_fraction"] * self.total_mass for s in segs])
        inertia = np.array([s["mass_fraction"] * self.total_mass
                            * s["radius_of_gyration_m"] ** 2 for s in segs])
        self.bodies = Bodies(mass=mass, inertia=inertia)
        self._anchors = {s["name"]: {k: np.asarray(v, dtype=float)
                                     for k, v in s["anchors"].items()}
                         for s in segs}

        joints = model["joints"]
        self.joint_names = [j["name"] for j in joints]
        self._joint_defs = joints
        self.joints = Joints(
            parent=np.array([self._seg_index[j["parent"]] for j in joints]),
            child=np.array([self._seg_index[j["child"]] for j in joints]),
            anchor_p=np.array([self._anchors[j["parent"]][j["parent_anchor"]]
                               for j in joints]),
            anchor_c=np.array([self._anchors[j["child"]][j["child_anchor"]]
                               for j in joints]),
            damping=np.array([j.get("damping", 0.0) for j in joints]),
            qmin=np.array([math.radians(j["range_deg"][0]) for j in joints]),
            qmax=np.array([math.radians(j["range_deg"][1]) for j in joints]),
            k_limit=np.array([j.get("limit_stiffness", 0.0) for j in joints]),
            c_limit=np.array([j.get("limit_damping", 0.0) for j in joints]),
        )

        self.muscle_set = self._instantiate_muscles(model)
        arms = self.muscle_set.arms_matrix()
        self.muscles = MuscleArrays(
            arms=arms,
            fmax=np.array([m.max_isometric_force for m in self.muscle_set.muscles]),
            lopt=np.array([m.optimal_fiber_length for m in self.muscle_set.muscles]),
            vmax=np.array([m.max_contraction_velocity for m in self.muscle_set.muscles]),
            tau_act=np.array([m.tau_act for m in self.muscle_set.muscles]),
            tau_deact=np.array([m.tau_deact for m in self.muscle_set.muscles]),
        )
        self.n_muscles = len(self.muscle_set)
        self.n_leg_muscles = self.n_muscles // 2
        self.leg_muscle_names = [m["name"] for m in model["leg_muscles"]]

        trunk_acts = model.get("trunk_actuators", [])
        weights = np.zeros((len(trunk_acts), len(self.joint_names)))
        jidx = {name: j for j, name in enumerate(self.joint_names)}
        for t, entry in enumerate(trunk_acts):
            for joint, w in entry["joint_weights"].items():
                weights[t, jidx[joint]] = w
        self.actuators = Actuators(
            weights=weights,
            gains=np.array([entry["gain_nm"] for entry in trunk_acts]))
        self.n_trunk = len(trunk_acts)

        contact = model["contact"]
        spheres = model["contact_spheres"]
        foot_code = {"right": 0, "left": 1, "none": -1}
        self.contacts = Contacts(
            body=np.array([self._seg_index[s["segment"]] for s in spheres]),
            local=np.array([s["local"] for s in spheres], dtype=float),
            radius=np.array([s["radius"] for s in spheres], dtype=float),
            foot=np.array([foot_code[s["foot"]] for s in spheres]),
            heel=np.array([1 if s["heel"] else 0 for s in spheres]),
            k_n=float(contact["stiffness"]),
            c_n=float(contact["damping"]),
            mu=float(contact["friction"]),
            v_reg=float(contact["v_reg"]),
        )
        self.muscle_map = model.get("muscle_map", {})

    def _instantiate_muscles(self, model) -> MuscleSet:
        defaults = model.get("muscle_defaults", {})
        muscles = []
        for side, suffix in (("right", "_r"), ("left", "_l")):
            for entry in model["leg_muscles"]:
                arms = {joint + suffix: arm
                        for joint, arm in entry["moment_arms"].items()}
                muscles.append(MuscleParams(
                    name=entry["name"] + suffix,
                    max_isometric_force=entry["max_isometric_force"],
                    optimal_fiber_length=entry["optimal_fiber_length"],
                    max_contraction_velocity=entry.get("max_contraction_velocity", 10.0),
                    tau_act=entry.get("tau_act", defaults.get("tau_act", 0.01)),
                    tau_deact=entry.get("tau_deact", defaults.get("tau_deact", 0.04)),
                    moment_arms=arms,
                ))
        return MuscleSet(muscles, self.joint_names)

    # -- kinematics -------------------------------------------------------

    def seg(self, name: str) -> int:
        return self._seg_index[name]

    def anchor_world(self, pos, segment: str, anchor: str) -> np.ndarray:
        i = self._seg_index[segment]
        local = self._anchors[segment][anchor]
        c, s = math.cos(pos[i, 2]), math.sin(pos[i, 2])
        rot = np.array([c * local[0] - s * local[1], s * local[0] + c * local[1]])
        return pos[i, :2] + rot

    def pose_from_angles(self, trunk_pitch: float, joint_angles,
                         pelvis_x: float, terrain: TerrainSpec) -> np.ndarray:
        """Forward kinematics from joint angles, dropped onto the terrain.

        joint_angles follows the model's joint order. The whole chain is
        translated vertically so the lowest contact sphere exactly touches
        the ground.
        """
        q = dict(zip(self.joint_names, joint_angles))
        theta = {"trunk": trunk_pitch}
        for side in ("r", "l"):
            theta[f"thigh_{side}"] = trunk_pitch + q[f"hip_{side}"]
            theta[f"shank_{side}"] = theta[f"thigh_{side}"] + q[f"knee_{side}"]
            theta[f"foot_{side}"] = theta[f"shank_{side}"] + q[f"ankle_{side}"]

        pos = np.zeros((len(self.segment_names), 3))
        for name in self.segment_names:
            pos[self._seg_index[name], 2] = theta[name]
        # put the pelvis (trunk hip anchor) at a provisional height, chain the
        # children from it, then drop everything onto the ground
        trunk = self._seg_index["trunk"]
        pelvis = self.anchor_world(pos, "trunk", "hip")
        pos[trunk, :2] = np.array([pelvis_x, 2.0]) - pelvis
        for jdef in self._joint_defs:
            parent_pt = self.anchor_world(pos, jdef["parent"], jdef["parent_anchor"])
            child = self._seg_index[jdef["child"]]
            local = self._anchors[jdef["child"]][jdef["child_anchor"]]
            c, s = math.cos(pos[child, 2]), math.sin(pos[child, 2])
            rot = np.array([c * local[0] - s * local[1], s * local[0] + c * local[1]])
            pos[child, :2] = parent_pt - rot

        clearance = math.inf
        for k in range(self.contacts.radius.size):
            b = self.contacts.body[k]
            c, s = math.cos(pos[b, 2]), math.sin(pos[b, 2])
            lx, ly = self.contacts.local[k]
            cx = pos[b, 0] + c * lx - s * ly
            cy = pos[b, 1] + s * lx + c * ly
            gap = cy - self.contacts.radius[k] - terrain.height_at(cx)
            clearance = min(clearance, gap)
        # sink to the approximate static penetration so settling starts close
        # to contact equilibrium
        n_foot_spheres = int(np.sum(self.contacts.foot >= 0))
        equilibrium_pen = (self.total_mass * self.gravity
                           / (self.contacts.k_n * n_foot_spheres))
        pos[:, 1] -= clearance + equilibrium_pen
        return pos

    def standing_pose(self, terrain: TerrainSpec, pelvis_x: float = 0.0,
                      jitter=None) -> np.ndarray:
        angles = np.zeros(len(self.joint_names))
        pitch = 0.0
        if jitter is not None:
            pitch = float(jitter[0])
            angles = np.asarray(jitter[1:], dtype=float)
        return self.pose_from_angles(pitch, angles, pelvis_x, terrain)

    def velocity_from_joint_rates(self, pos, trunk_velocity, trunk_omega,
                                  rates) -> np.ndarray:
        """Constraint-consistent body velocities from generalized rates.

        Propagates angular rates down the chains and matches linear velocities
        at every joint anchor, so pin constraints see zero relative velocity.
        """
        rates = dict(zip(self.joint_names, rates))
        vel = np.zeros_like(pos)
        trunk = self._seg_index["trunk"]
        vel[trunk, 0], vel[trunk, 1] = trunk_velocity
        vel[trunk, 2] = trunk_omega
        for jdef, name in zip(self._joint_defs, self.joint_names):
            parent = self._seg_index[jdef["parent"]]
            child = self._seg_index[jdef["child"]]
            anchor = self.anchor_world(pos, jdef["parent"], jdef["parent_anchor"])
            rp = anchor - pos[parent, :2]
            vp = vel[parent, :2] + vel[parent, 2] * np.array([-rp[1], rp[0]])
            vel[child, 2] = vel[parent, 2] + rates[name]
            rc = anchor - pos[child, :2]
            vel[child, :2] = vp - vel[child, 2] * np.array([-rc[1], rc[0]])
        return vel

    def settle(self, pos, terrain: TerrainSpec, max_substeps: int = 4000,
               dt: float = 1e-3, tol: float = 0.01):
        """Quasi-static relaxation onto the ground (velocities zeroed).

        Runs single substeps, zeroing velocities after each, until the total
        vertical contact force is within tol of body weight (checked every 50
        substeps) or the budget runs out. Returns the final per-foot GRF.
        """
        vel = np.zeros_like(pos)
        act = np.zeros(self.n_muscles)
        exc = np.zeros(self.n_muscles)
        trunk_u = np.zeros(max(self.n_trunk, 1))
        heel_prev = np.full(2, 1e9)    # suppress crossing bookkeeping while settling
        grf = np.zeros((2, 2))
        crossings = np.zeros(2, dtype=np.int64)
        out_muscle = np.zeros((self.n_muscles, 3))
        out_moments = np.zeros(len(self.joint_names))
        xs, ys = terrain.polyline()
        ground = Ground(xs=xs, ys=ys)
        weight = self.total_mass * self.gravity
        for i in range(max_substeps):
            advance(pos, vel, act, exc, trunk_u, 1, dt, self.gravity,
                    self.bodies, self.joints, self.muscles, self.actuators,
                    self.contacts, ground, heel_prev, grf, crossings,
                    out_muscle, out_moments)
            vel[:] = 0.0
            if i % 50 == 49 and abs(grf[:, 1].sum() - weight) < tol * weight:
                break
        return grf.copy()

    def com_velocity(self, vel) -> np.ndarray:
        return (self.bodies.mass[:, None] * vel[:, :2]).sum(axis=0) / self.total_mass

    def com_position(self, pos) -> np.ndarray:
        return (self.bodies.mass[:, None] * pos[:, :2]).sum(axis=0) / self.total_mass
