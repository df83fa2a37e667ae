"""Hill-type muscle dynamics: excitation -> activation -> force -> moment.

Rigid-tendon model with constant signed moment arms. Force is
F = Fmax * (a * fL(l) * fV(v) + fP(l)) with a Gaussian active force-length
curve centered at optimal length, the classic Hill force-velocity hyperbola
(fV(0) = 1, zero at maximal shortening, eccentric plateau 1.8), and an
exponential passive curve that vanishes at and below optimal length.

Sign conventions: fiber_velocity_norm is in optimal lengths per second with
shortening POSITIVE. A positive moment arm means the muscle generates a
positive moment at that joint.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

# force-length / force-velocity shape constants
FL_WIDTH = 0.45          # Gaussian width of the active force-length curve
FV_SHAPE = 0.25          # Hill hyperbola curvature
FV_ECC_PLATEAU = 1.8     # eccentric force plateau (x isometric)
FP_EXP = 4.0             # passive exponential gain
FP_STRAIN = 0.6          # passive strain at which fP reaches 1


@dataclass
class MuscleParams:
    name: str
    max_isometric_force: float       # N
    optimal_fiber_length: float      # m
    max_contraction_velocity: float = 10.0   # optimal lengths / s
    tau_act: float = 0.01            # s
    tau_deact: float = 0.04          # s
    moment_arms: dict = field(default_factory=dict)   # joint -> m, signed

    def __post_init__(self):
        for label, value in (("max_isometric_force", self.max_isometric_force),
                             ("optimal_fiber_length", self.optimal_fiber_length),
                             ("max_contraction_velocity", self.max_contraction_velocity),
                             ("tau_act", self.tau_act),
                             ("tau_deact", self.tau_deact)):
            if not value > 0:
                raise ValueError(f"{self.name}: {label} must be positive, got {value}")


@dataclass
class MuscleState:
    activation: float
    fiber_length_norm: float         # l / l_opt
    fiber_velocity_norm: float = 0.0  # (dl/dt) / l_opt, shortening positive

    def __post_init__(self):
        if not 0.0 <= self.activation <= 1.0:
            raise ValueError(f"activation {self.activation} outside [0, 1]")
        if not self.fiber_length_norm > 0:
            raise ValueError("fiber_length_norm must be positive")


def activation_step(excitation, activation, dt: float, params: MuscleParams):
    """One explicit Euler step of first-order activation dynamics.

    da/dt = (u - a) / tau, with tau = tau_act when u > a else tau_deact.
    The result is clamped to [0, 1]. Stable (and within [0, 1] without the
    clamp) for dt <= min(tau) / 2; callers sub-step accordingly.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    u = np.asarray(excitation, dtype=float)
    a = np.asarray(activation, dtype=float)
    tau = np.where(u > a, params.tau_act, params.tau_deact)
    out = np.clip(a + dt * (u - a) / tau, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def force_length(lnorm):
    """Active force-length curve, Gaussian about optimal length."""
    lnorm = np.asarray(lnorm, dtype=float)
    out = np.exp(-(((lnorm - 1.0) / FL_WIDTH) ** 2))
    return float(out) if out.ndim == 0 else out


def force_velocity(vnorm_frac):
    """Hill force-velocity factor on v / v_max (shortening positive).

    fV(0) = 1; fV(1) = 0 at maximal shortening; lengthening saturates at the
    eccentric plateau.
    """
    v = np.asarray(vnorm_frac, dtype=float)
    shortening = np.clip(v, 0.0, 1.0)
    concentric = (1.0 - shortening) / (1.0 + shortening / FV_SHAPE)
    lengthening = np.clip(-v, 0.0, 1.0)
    gain = (FV_ECC_PLATEAU - 1.0) * lengthening / (lengthening + FV_SHAPE / 7.56)
    eccentric = 1.0 + gain
    out = np.where(v >= 0.0, concentric, eccentric)
    return float(out) if out.ndim == 0 else out


def passive_force(lnorm):
    """Passive elastic curve: zero at/below optimal length, 1 at 60% strain."""
    lnorm = np.asarray(lnorm, dtype=float)
    strain = np.maximum(lnorm - 1.0, 0.0)
    out = np.expm1(FP_EXP * strain / FP_STRAIN) / np.expm1(FP_EXP)
    return float(out) if out.ndim == 0 else out


def muscle_force(state: MuscleState, activation: float, params: MuscleParams) -> float:
    """Tendon force in newtons for the given state; never negative."""
    fl = force_length(state.fiber_length_norm)
    fv = force_velocity(state.fiber_velocity_norm / params.max_contraction_velocity)
    fp = passive_force(state.fiber_length_norm)
    force = params.max_isometric_force * (activation * fl * fv + fp)
    return max(force, 0.0)


def joint_moments(forces, muscles, joint_names) -> dict:
    """Net moment per joint: moment_j = sum_i arm_ij * F_i."""
    forces = np.asarray(forces, dtype=float)
    if forces.shape != (len(muscles),):
        raise ValueError(f"expected {len(muscles)} forces, got shape {forces.shape}")
    if np.any(forces < 0):
        raise ValueError("muscle forces must be non-negative")
    moments = {name: 0.0 for name in joint_names}
    for force, muscle in zip(forces, muscles):
        for joint, arm in muscle.moment_arms.items():
            moments[joint] += arm * force
    return moments


@dataclass
class MuscleSet:
    """An ordered muscle list plus the joints their arms refer to."""

    muscles: list
    joint_names: list

    def __post_init__(self):
        for muscle in self.muscles:
            for joint in muscle.moment_arms:
                if joint not in self.joint_names:
                    raise DataError(
                        f"muscle {muscle.name!r} references unknown joint {joint!r}")

    def __len__(self):
        return len(self.muscles)

    @property
    def names(self):
        return [m.name for m in self.muscles]

    def arms_matrix(self) -> np.ndarray:
        """Dense (n_muscles x n_joints) signed moment-arm table."""
        arms = np.zeros((len(self.muscles), len(self.joint_names)))
        jidx = {name: j for j, name in enumerate(self.joint_names)}
        for i, muscle in enumerate(self.muscles):
            for joint, arm in muscle.moment_arms.items():
                arms[i, jidx[joint]] = arm
        return arms

    @classmethod
    def from_dict(cls, entries, joint_names) -> "MuscleSet":
        muscles = []
        for entry in entries:
            try:
                muscles.append(MuscleParams(
                    name=entry["name"],
                    max_isometric_force=entry["max_isometric_force"],
                    optimal_fiber_length=entry["optimal_fiber_length"],
                    max_contraction_velocity=entry.get("max_contraction_velocity", 10.0),
                    tau_act=entry.get("tau_act", 0.01),
                    tau_deact=entry.get("tau_deact", 0.04),
                    moment_arms=dict(entry["moment_arms"]),
                ))
            except KeyError as exc:
                raise DataError(f"muscle entry missing field {exc}") from exc
        return cls(muscles, list(joint_names))


def load_muscle_set(path) -> MuscleSet:
    """Read the muscle block of a model file (JSON)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"model file not found: {path}")
    with open(path) as fh:
        model = json.load(fh)
    if "muscles" not in model or "joints" not in model:
        raise DataError(f"{path}: model file needs 'muscles' and 'joints'")
    joint_names = [j["name"] for j in model["joints"]]
    return MuscleSet.from_dict(model["muscles"], joint_names)
