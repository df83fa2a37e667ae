import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synloco.reward import (
    RewardBreakdown,
    RewardParams,
    RewardWeights,
    r_ap,
    r_effort,
    r_head,
    r_ml,
    r_rom,
    total_reward,
)

P = RewardParams()


# ---------------------------------------------------------------------------
# closed forms with published constants
# ---------------------------------------------------------------------------

def test_ap_plateau():
    assert r_ap(1.23, 1.20) == 1.0           # |dv| = 0.03 <= delta
    assert r_ap(1.20, 1.20) == 1.0
    assert r_ap(1.25, 1.20) == 1.0           # exactly at the band edge


def test_ap_outside_plateau():
    # |dv| = 0.12: exp(-0.06 * ((0.12-0.05)/0.07)^2) = exp(-0.06)
    assert abs(r_ap(1.32, 1.20) - math.exp(-0.06)) < 1e-12


def test_ap_continuous_at_plateau_edge():
    just_outside = r_ap(1.20 + 0.05 + 1e-9, 1.20)
    assert abs(just_outside - 1.0) < 1e-12


def test_ml_values():
    assert r_ml(0.0) == 1.0
    assert abs(r_ml(0.10) - math.exp(-0.06)) < 1e-12
    assert abs(r_ml(0.20) - math.exp(-0.24)) < 1e-12


def test_head_values():
    assert r_head((0.0, 0.0, 0.0)) == 1.0
    assert abs(r_head((0.60, 0.65, 1.40)) - math.exp(-0.18)) < 1e-12
    assert abs(r_head((0.60, 0.0, 0.0)) - math.exp(-0.06)) < 1e-12


def test_effort_values():
    assert r_effort([]) == 0.0
    assert r_effort(np.zeros(16)) == 0.0
    assert r_effort([0.5, 0.5]) == 0.5
    assert r_effort(np.ones(16)) == 16.0


def test_rom_values():
    assert r_rom(-30.0, -20.0, 0.0) == 0.0
    assert r_rom(5.0, 0.0, 0.0) == 5.0                  # P_up(5, 0) = 5
    # P_box(-25, -20, 10) = max(0, -35) + max(0, 5) = 5
    assert r_rom(0.0, 0.0, -25.0) == 5.0
    assert r_rom(0.0, 0.0, 15.0) == 5.0


def test_total_reward_perfect_step():
    out = total_reward(v_x=1.2, v_target=1.2, v_z=0.0, omega=(0, 0, 0),
                       activations=[], theta_knee_r=-10, theta_knee_l=-10,
                       theta_lumbar=0.0, fell=False)
    assert out.total == 1.0
    assert out.r_vel == 1.0


def test_total_reward_fall_only():
    out = total_reward(v_x=1.2, v_target=1.2, v_z=0.0, omega=(0, 0, 0),
                       activations=[], theta_knee_r=-10, theta_knee_l=-10,
                       theta_lumbar=0.0, fell=True,
                       weights=RewardWeights(w_vel=0.0, w_fall=-100.0))
    assert out.total == -100.0
    assert out.r_fall == 1.0


def test_total_reward_composite_case():
    # Components at one sigma each: r_ap = r_ml = exp(-0.06),
    # r_head = exp(-0.18), so r_vel = exp(-0.30); effort 0.5; rom 5.
    weights = RewardWeights(w_vel=1.0, w_effort=-0.01, w_rom=-0.1, w_fall=-100.0)
    out = total_reward(v_x=1.32, v_target=1.20, v_z=0.10,
                       omega=(0.60, 0.65, 1.40), activations=[0.5, 0.5],
                       theta_knee_r=5.0, theta_knee_l=0.0, theta_lumbar=0.0,
                       fell=False, weights=weights)
    expected = math.exp(-0.30) - 0.01 * 0.5 - 0.1 * 5.0
    assert abs(out.r_vel - math.exp(-0.30)) < 1e-12
    assert abs(out.total - expected) < 1e-12


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(st.floats(-3, 3), st.floats(0.5, 1.8), st.floats(-1, 1),
       st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_vel_factors_in_unit_interval(vx, vt, vz, wx, wy, wz):
    ap, ml, head = r_ap(vx, vt), r_ml(vz), r_head((wx, wy, wz))
    for factor in (ap, ml, head):
        assert 0.0 < factor <= 1.0
    assert ap * ml * head <= min(ap, ml, head) + 1e-15


@settings(max_examples=200, deadline=None)
@given(st.floats(-60, 30), st.floats(-60, 30), st.floats(-60, 30))
def test_rom_nonnegative_and_zero_on_box(kr, kl, lum):
    value = r_rom(kr, kl, lum)
    assert value >= 0.0
    inside = kr <= 0.0 and kl <= 0.0 and -20.0 <= lum <= 10.0
    assert (value == 0.0) == inside


def test_rom_piecewise_linear():
    # Slope 1 per violated degree on each term.
    assert r_rom(2.0, 3.0, 12.0) == pytest.approx(2.0 + 3.0 + 2.0)


def test_total_reward_reproducible():
    args = dict(v_x=1.1, v_target=0.9, v_z=0.05, omega=(0.1, -0.2, 0.4),
                activations=np.linspace(0, 1, 18), theta_knee_r=1.0,
                theta_knee_l=-3.0, theta_lumbar=-22.0, fell=False)
    a = total_reward(**args)
    b = total_reward(**args)
    assert a == b and isinstance(a, RewardBreakdown)


def test_weight_sign_validation():
    with pytest.raises(ValueError):
        RewardWeights(w_effort=0.01)
    with pytest.raises(ValueError):
        RewardWeights(w_vel=-1.0)
    with pytest.raises(ValueError):
        RewardParams(sigma_vx=0.0)
    with pytest.raises(ValueError):
        RewardParams(lumbar_box_deg=(10.0, -20.0))
