"""Planar rigid-body dynamics for the muscle-driven biped.

Maximal-coordinate formulation: every segment carries (x, y, theta) and pin
joints are enforced by constraint impulses each substep (KKT solve with
Baumgarte position stabilization). Ground contact is a penalty model: spring
plus damper along the local terrain normal, regularized Coulomb friction along
the tangent. Integration is semi-implicit Euler at the substep rate, with
muscle activation dynamics and Hill-type force evaluation folded into the same
inner loop so fiber velocities always see the current joint rates.

The inner loop is a numba kernel over plain float64 arrays; the model arrays
are grouped in namedtuples built by the biped module. Force-curve constants
are shared with the muscle module so the kernel and the reference
implementation agree.
"""

from __future__ import annotations

from collections import namedtuple

import numpy as np
from numba import njit

from ..muscle import FL_WIDTH, FP_EXP, FP_STRAIN, FV_ECC_PLATEAU, FV_SHAPE

Bodies = namedtuple("Bodies", "mass inertia")
Joints = namedtuple("Joints", "parent child anchor_p anchor_c damping qmin qmax k_limit c_limit")
Muscles = namedtuple("Muscles", "arms fmax lopt vmax tau_act tau_deact")
Actuators = namedtuple("Actuators", "weights gains")
Contacts = namedtuple("Contacts", "body local radius foot heel k_n c_n mu v_reg")
Ground = namedtuple("Ground", "xs ys")

BAUMGARTE = 0.2
CFM = 1e-10
VELOCITY_LIMIT = 1e3     # divergence guard, m/s or rad/s

_EXPM1_FP = float(np.expm1(FP_EXP))


@njit(cache=True)
def _ground_contact(x, y, xs, ys):
    """Surface point/frame under (x, y): returns (nx, ny, tx, ty, dist)."""
    idx = np.searchsorted(xs, x) - 1
    if idx < 0:
        idx = 0
    elif idx > xs.size - 2:
        idx = xs.size - 2
    x0, y0 = xs[idx], ys[idx]
    dx, dy = xs[idx + 1] - x0, ys[idx + 1] - y0
    norm = (dx * dx + dy * dy) ** 0.5
    tx, ty = dx / norm, dy / norm
    nx, ny = -ty, tx
    dist = (x - x0) * nx + (y - y0) * ny
    return nx, ny, tx, ty, dist


@njit(cache=True)
def advance(pos, vel, act, exc, trunk_u, n_sub, dt, gravity,
            bodies, joints, muscles, actuators, contacts, ground,
            heel_prev, out_grf, out_crossings, out_muscle, out_moments):
    """Advance the model n_sub substeps of length dt, in place.

    heel_prev carries each foot's heel normal force across calls (crossing
    detection state). out_grf receives the substep-mean GRF per foot,
    out_crossings the per-foot count of upward 15 N heel-force crossings,
    out_muscle the final-substep (l_norm, v_norm, force) per muscle and
    out_moments the final-substep net actuation torque per joint.
    Returns 0, or 1 when the state diverged (episode must end).
    """
    nb = bodies.mass.size
    nj = joints.parent.size
    nm = muscles.fmax.size
    na = actuators.gains.size
    nc = contacts.radius.size

    q = np.zeros(nj)
    qd = np.zeros(nj)
    forces = np.zeros((nb, 3))
    muscle_force = np.zeros(nm)
    joint_tau = np.zeros(nj)
    J = np.zeros((2 * nj, 3 * nb))
    C = np.zeros(2 * nj)
    minv = np.zeros(3 * nb)
    for b in range(nb):
        minv[3 * b] = 1.0 / bodies.mass[b]
        minv[3 * b + 1] = 1.0 / bodies.mass[b]
        minv[3 * b + 2] = 1.0 / bodies.inertia[b]

    out_grf[:] = 0.0
    out_crossings[:] = 0
    heel_threshold = 15.0

    for _ in range(n_sub):
        # first-order activation dynamics (stable: dt << tau)
        for i in range(nm):
            u = exc[i]
            a = act[i]
            tau = muscles.tau_act[i] if u > a else muscles.tau_deact[i]
            a = a + dt * (u - a) / tau
            act[i] = min(max(a, 0.0), 1.0)

        for j in range(nj):
            q[j] = pos[joints.child[j], 2] - pos[joints.parent[j], 2]
            qd[j] = vel[joints.child[j], 2] - vel[joints.parent[j], 2]
            joint_tau[j] = 0.0

        # Hill muscle forces on rigid tendons with constant moment arms
        for i in range(nm):
            arm_q = 0.0
            arm_qd = 0.0
            for j in range(nj):
                arm_q += muscles.arms[i, j] * q[j]
                arm_qd += muscles.arms[i, j] * qd[j]
            lnorm = 1.0 - arm_q / muscles.lopt[i]
            if lnorm < 0.01:
                lnorm = 0.01
            vshort = arm_qd / muscles.lopt[i]          # l_opt/s, shortening +
            vfrac = vshort / muscles.vmax[i]
            fl = np.exp(-(((lnorm - 1.0) / FL_WIDTH) ** 2))
            if vfrac >= 0.0:
                vv = vfrac if vfrac < 1.0 else 1.0
                fv = (1.0 - vv) / (1.0 + vv / FV_SHAPE)
            else:
                vv = -vfrac if vfrac > -1.0 else 1.0
                fv = 1.0 + (FV_ECC_PLATEAU - 1.0) * vv / (vv + FV_SHAPE / 7.56)
            strain = lnorm - 1.0
            fp = np.expm1(FP_EXP * strain / FP_STRAIN) / _EXPM1_FP if strain > 0.0 else 0.0
            f = muscles.fmax[i] * (act[i] * fl * fv + fp)
            muscle_force[i] = f if f > 0.0 else 0.0
            out_muscle[i, 0] = lnorm
            out_muscle[i, 1] = vshort
            out_muscle[i, 2] = muscle_force[i]
            for j in range(nj):
                joint_tau[j] += muscles.arms[i, j] * muscle_force[i]

        # direct torque actuators (trunk block)
        for t in range(na):
            u = trunk_u[t]
            if u < 0.0:
                u = 0.0
            elif u > 1.0:
                u = 1.0
            for j in range(nj):
                joint_tau[j] += actuators.weights[t, j] * u * actuators.gains[t]

        # passive joint damping and soft range-of-motion stops
        for j in range(nj):
            joint_tau[j] -= joints.damping[j] * qd[j]
            if q[j] > joints.qmax[j]:
                joint_tau[j] -= joints.k_limit[j] * (q[j] - joints.qmax[j]) \
                    + joints.c_limit[j] * qd[j]
            elif q[j] < joints.qmin[j]:
                joint_tau[j] += joints.k_limit[j] * (joints.qmin[j] - q[j]) \
                    - joints.c_limit[j] * qd[j]

        for b in range(nb):
            forces[b, 0] = 0.0
            forces[b, 1] = -bodies.mass[b] * gravity
            forces[b, 2] = 0.0
        for j in range(nj):
            forces[joints.child[j], 2] += joint_tau[j]
            forces[joints.parent[j], 2] -= joint_tau[j]
            out_moments[j] = joint_tau[j]

        # penalty ground contact on the foot spheres
        heel_now_r = 0.0
        heel_now_l = 0.0
        for c in range(nc):
            b = contacts.body[c]
            cth = np.cos(pos[b, 2])
            sth = np.sin(pos[b, 2])
            rx = cth * contacts.local[c, 0] - sth * contacts.local[c, 1]
            ry = sth * contacts.local[c, 0] + cth * contacts.local[c, 1]
            cx = pos[b, 0] + rx
            cy = pos[b, 1] + ry
            nx, ny, tx, ty, dist = _ground_contact(cx, cy, ground.xs, ground.ys)
            pen = contacts.radius[c] - dist
            if pen <= 0.0:
                continue
            # contact point at the sphere's deepest material point
            px = cx - nx * contacts.radius[c]
            py = cy - ny * contacts.radius[c]
            ax = px - pos[b, 0]
            ay = py - pos[b, 1]
            vpx = vel[b, 0] - vel[b, 2] * ay
            vpy = vel[b, 1] + vel[b, 2] * ax
            vn = vpx * nx + vpy * ny
            fn = contacts.k_n * pen - contacts.c_n * vn
            if fn < 0.0:
                fn = 0.0
            vt = vpx * tx + vpy * ty
            ft = -contacts.mu * fn * np.tanh(vt / contacts.v_reg)
            fx = nx * fn + tx * ft
            fy = ny * fn + ty * ft
            forces[b, 0] += fx
            forces[b, 1] += fy
            forces[b, 2] += ax * fy - ay * fx
            foot = contacts.foot[c]
            if foot >= 0:                    # trunk spheres carry no foot GRF
                out_grf[foot, 0] += fx
                out_grf[foot, 1] += fy
                if contacts.heel[c] == 1:
                    if foot == 0:
                        heel_now_r += fn
                    else:
                        heel_now_l += fn

        if heel_now_r > heel_threshold and heel_prev[0] <= heel_threshold:
            out_crossings[0] += 1
        if heel_now_l > heel_threshold and heel_prev[1] <= heel_threshold:
            out_crossings[1] += 1
        heel_prev[0] = heel_now_r
        heel_prev[1] = heel_now_l

        # unconstrained velocity update
        for b in range(nb):
            vel[b, 0] += dt * forces[b, 0] * minv[3 * b]
            vel[b, 1] += dt * forces[b, 1] * minv[3 * b + 1]
            vel[b, 2] += dt * forces[b, 2] * minv[3 * b + 2]

        # pin-joint constraint impulses with Baumgarte stabilization
        if nj > 0:
            J[:] = 0.0
            for j in range(nj):
                a = joints.parent[j]
                b = joints.child[j]
                ca, sa = np.cos(pos[a, 2]), np.sin(pos[a, 2])
                cb, sb = np.cos(pos[b, 2]), np.sin(pos[b, 2])
                rax = ca * joints.anchor_p[j, 0] - sa * joints.anchor_p[j, 1]
                ray = sa * joints.anchor_p[j, 0] + ca * joints.anchor_p[j, 1]
                rbx = cb * joints.anchor_c[j, 0] - sb * joints.anchor_c[j, 1]
                rby = sb * joints.anchor_c[j, 0] + cb * joints.anchor_c[j, 1]
                C[2 * j] = pos[a, 0] + rax - pos[b, 0] - rbx
                C[2 * j + 1] = pos[a, 1] + ray - pos[b, 1] - rby
                J[2 * j, 3 * a] = 1.0
                J[2 * j, 3 * a + 2] = -ray
                J[2 * j, 3 * b] = -1.0
                J[2 * j, 3 * b + 2] = rby
                J[2 * j + 1, 3 * a + 1] = 1.0
                J[2 * j + 1, 3 * a + 2] = rax
                J[2 * j + 1, 3 * b + 1] = -1.0
                J[2 * j + 1, 3 * b + 2] = -rbx
            JM = J * minv          # J @ Minv with diagonal Minv
            A = JM @ J.T
            for d in range(2 * nj):
                A[d, d] += CFM
            rhs = np.zeros(2 * nj)
            for r in range(2 * nj):
                acc = 0.0
                for b3 in range(3 * nb):
                    acc += J[r, b3] * vel[b3 // 3, b3 % 3]
                rhs[r] = -(acc + (BAUMGARTE / dt) * C[r])
            lam = np.linalg.solve(A, rhs)
            impulse = JM.T @ lam
            for b in range(nb):
                vel[b, 0] += impulse[3 * b]
                vel[b, 1] += impulse[3 * b + 1]
                vel[b, 2] += impulse[3 * b + 2]

        for b in range(nb):
            pos[b, 0] += dt * vel[b, 0]
            pos[b, 1] += dt * vel[b, 1]
            pos[b, 2] += dt * vel[b, 2]

        for b in range(nb):
            for d in range(3):
                v = vel[b, d]
                if not np.isfinite(v) or abs(v) > VELOCITY_LIMIT:
                    return 1
                if not np.isfinite(pos[b, d]):
                    return 1

    out_grf /= n_sub
    return 0


def mechanical_energy(pos, vel, bodies, gravity) -> float:
    """Kinetic plus gravitational potential energy of all segments."""
    kinetic = 0.5 * float(
        np.sum(bodies.mass * (vel[:, 0] ** 2 + vel[:, 1] ** 2))
        + np.sum(bodies.inertia * vel[:, 2] ** 2))
    potential = float(gravity * np.sum(bodies.mass * pos[:, 1]))
    return kinetic + potential


def joint_angles(pos, joints) -> np.ndarray:
    """Relative joint angles child minus parent (radians)."""
    return pos[joints.child, 2] - pos[joints.parent, 2]


def joint_rates(vel, joints) -> np.ndarray:
    return vel[joints.child, 2] - vel[joints.parent, 2]
