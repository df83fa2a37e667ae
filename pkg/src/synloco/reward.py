"""Per-step locomotion reward: velocity tracking, effort, range-of-motion,
and fall penalty.

Total reward is a weighted sum
    R = w_vel * R_vel + w_effort * R_effort + w_rom * R_rom + w_fall * R_fall
where R_vel is the product of a plateaued Gaussian on forward speed error, a
Gaussian on mediolateral speed, and axis-wise Gaussians on head angular
velocity. Effort is the sum of squared activations, range-of-motion is a
piecewise-linear penalty on knee hyperextension and on lumbar extension
outside a fixed box, and R_fall is 1 on the step an episode ends in a fall.
Effort, range-of-motion, and fall weights are negative; penalties grow as
behavior degrades and the weights turn them into reward losses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class RewardParams:
    gain: float = 0.06                       # shared Gaussian gain c
    speed_tolerance: float = 0.05            # plateau half-width delta, m/s
    sigma_vx: float = 0.07                   # forward speed scale, m/s
    sigma_vz: float = 0.10                   # mediolateral speed scale, m/s
    sigma_omega: tuple = (0.60, 0.65, 1.40)  # head angular velocity scales, rad/s
    knee_upper_deg: float = 0.0              # hyperextension bound (theta > 0)
    lumbar_box_deg: tuple = (-20.0, 10.0)

    def __post_init__(self):
        if not (self.sigma_vx > 0 and self.sigma_vz > 0
                and all(s > 0 for s in self.sigma_omega)):
            raise ValueError("all sigma scales must be positive")
        if not self.lumbar_box_deg[0] < self.lumbar_box_deg[1]:
            raise ValueError("lumbar box lower bound must be below upper bound")


@dataclass(frozen=True)
class RewardWeights:
    w_vel: float = 1.0
    w_effort: float = -0.01
    w_rom: float = -0.1
    w_fall: float = -100.0

    def __post_init__(self):
        if self.w_vel < 0:
            raise ValueError("w_vel must be >= 0")
        for name, w in (("w_effort", self.w_effort), ("w_rom", self.w_rom),
                        ("w_fall", self.w_fall)):
            if w > 0:
                raise ValueError(f"{name} is a penalty weight and must be <= 0")


@dataclass(frozen=True)
class RewardBreakdown:
    r_ap: float
    r_ml: float
    r_head: float
    r_vel: float
    r_effort: float
    r_rom: float
    r_fall: float
    total: float


def r_ap(v_x: float, v_target: float, params: RewardParams = RewardParams()) -> float:
    """Plateaued Gaussian on forward speed error.

    Exactly 1 inside the tolerance band; the exponent vanishes at the band
    edge, so the factor is continuous there.
    """
    err = abs(v_x - v_target)
    if err <= params.speed_tolerance:
        return 1.0
    excess = err - params.speed_tolerance
    return math.exp(-params.gain * (excess / params.sigma_vx) ** 2)


def r_ml(v_z: float, params: RewardParams = RewardParams()) -> float:
    """Gaussian penalty factor on mediolateral velocity."""
    return math.exp(-params.gain * (v_z / params.sigma_vz) ** 2)


def r_head(omega, params: RewardParams = RewardParams()) -> float:
    """Axis-wise Gaussian penalty factor on head angular velocity (3-vector)."""
    if len(omega) != len(params.sigma_omega):
        raise ValueError(f"expected {len(params.sigma_omega)} angular rates")
    out = 1.0
    for w, sigma in zip(omega, params.sigma_omega):
        out *= math.exp(-params.gain * (w / sigma) ** 2)
    return out


def r_effort(activations) -> float:
    """Quadratic effort: sum of squared muscle activations."""
    return float(sum(a * a for a in activations))


def _p_up(x: float, upper: float) -> float:
    return max(0.0, x - upper)


def _p_box(x: float, lower: float, upper: float) -> float:
    return max(0.0, x - upper) + max(0.0, lower - x)


def r_rom(theta_knee_r: float, theta_knee_l: float, theta_lumbar: float,
          params: RewardParams = RewardParams()) -> float:
    """Range-of-motion penalty in degrees.

    Knee angles use hyperextension-positive convention and are penalized above
    the upper bound (default 0 deg); lumbar extension is penalized outside the
    configured box.
    """
    lo, hi = params.lumbar_box_deg
    return (_p_up(theta_knee_r, params.knee_upper_deg)
            + _p_up(theta_knee_l, params.knee_upper_deg)
            + _p_box(theta_lumbar, lo, hi))


def total_reward(v_x: float, v_target: float, v_z: float, omega, activations,
                 theta_knee_r: float, theta_knee_l: float, theta_lumbar: float,
                 fell: bool, weights: RewardWeights = RewardWeights(),
                 params: RewardParams = RewardParams()) -> RewardBreakdown:
    """Compose the full per-step reward with its component breakdown."""
    ap = r_ap(v_x, v_target, params)
    ml = r_ml(v_z, params)
    head = r_head(omega, params)
    vel = ap * ml * head
    effort = r_effort(activations)
    rom = r_rom(theta_knee_r, theta_knee_l, theta_lumbar, params)
    fall = 1.0 if fell else 0.0
    total = (weights.w_vel * vel + weights.w_effort * effort
             + weights.w_rom * rom + weights.w_fall * fall)
    return RewardBreakdown(ap, ml, head, vel, effort, rom, fall, total)
