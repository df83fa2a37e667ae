"""Seeded synthetic data: activation matrices, walking trials, and reference
gait datasets.

These generators back the demo pipeline and the test corpus. The activation
set mimics an inverse-analysis output for 40 right-leg muscles (names follow
the common lower-limb model naming so the bundled muscle grouping map
applies); it is built as a non-negative rank-10 product plus noise, so a
k=10 factorization recovers it almost exactly. The gait trial generator
produces filtered-looking kinematic/GRF channels with heel-strike structure,
and the reference generator emits per-subject cycle datasets in the
benchmark's directory format.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .evalbench import BenchmarkDataset, save_reference_dataset
from .synergy import ActivationMatrix

#: 40 right-leg muscle names; grouped onto the planar muscle set by the
#: bundled model's muscle_map (ungrouped ones are dropped at projection).
M40_MUSCLE_NAMES = [
    "psoas", "iliacus",
    "glut_max1", "glut_max2", "glut_max3",
    "glut_med1", "glut_med2", "glut_med3",
    "glut_min1", "glut_min2", "glut_min3",
    "semimem", "semiten", "bifemlh", "bifemsh",
    "sar", "add_long", "add_brev",
    "add_mag1", "add_mag2", "add_mag3",
    "tfl", "pect", "grac",
    "rect_fem", "vas_med", "vas_int", "vas_lat",
    "med_gas", "lat_gas", "soleus",
    "tib_post", "flex_dig", "flex_hal",
    "tib_ant", "per_brev", "per_long", "per_tert",
    "ext_dig", "ext_hal",
]


def _bump(x, center, width):
    return np.exp(-((x - center) / width) ** 2)


#: Functional synergy structure used to synthesize gait-like activations:
#: (cycle-phase center, width, {muscle or prefix: weight}). Timing follows
#: the usual walking sequence (weight acceptance, push-off, swing initiation,
#: foot clearance, late-swing deceleration, plus minor stabilizers).
GAIT_SYNERGIES = [
    (0.10, 0.10, {"glut_max": 0.9, "glut_med": 0.7, "vas": 1.0, "add_mag": 0.3}),
    (0.45, 0.12, {"soleus": 1.0, "med_gas": 0.9, "lat_gas": 0.8,
                  "per_long": 0.4, "flex_hal": 0.3}),
    (0.62, 0.09, {"psoas": 1.0, "iliacus": 0.9, "rect_fem": 0.6, "sar": 0.4}),
    (0.75, 0.15, {"tib_ant": 1.0, "ext_dig": 0.5, "ext_hal": 0.4,
                  "per_tert": 0.3}),
    (0.93, 0.08, {"semimem": 0.9, "semiten": 0.8, "bifemlh": 1.0,
                  "bifemsh": 0.5}),
    (0.05, 0.07, {"tib_ant": 0.8, "glut_med": 0.4}),
    (0.30, 0.18, {"soleus": 0.4, "glut_min": 0.5, "tfl": 0.5}),
    (0.55, 0.10, {"add_long": 0.6, "add_brev": 0.5, "grac": 0.5, "pect": 0.4}),
    (0.85, 0.10, {"psoas": 0.3, "tib_post": 0.5, "flex_dig": 0.4}),
    (0.20, 0.25, {"glut_max": 0.3, "vas": 0.3, "soleus": 0.2}),
]


def _gait_weight_row(pattern: dict) -> np.ndarray:
    row = np.zeros(len(M40_MUSCLE_NAMES))
    for key, weight in pattern.items():
        for j, name in enumerate(M40_MUSCLE_NAMES):
            if name.startswith(key):
                row[j] = weight
    return row


def synthetic_activation_matrix(seed: int = 0, n_samples: int = 1000,
                                n_strides: int = 8,
                                noise: float = 0.01) -> ActivationMatrix:
    """Gait-like rank-10 activation matrix over the 40-muscle set.

    Ten functional synergies with gait-phase temporal bumps generate the
    matrix (walking-data stand-in for inverse-analysis output), with mild
    per-stride timing and amplitude variability plus sensor noise.
    """
    rng = np.random.default_rng(seed)
    phase = (np.linspace(0.0, float(n_strides), n_samples)) % 1.0
    W = np.zeros((n_samples, len(GAIT_SYNERGIES)))
    H = np.zeros((len(GAIT_SYNERGIES), len(M40_MUSCLE_NAMES)))
    for k, (center, width, pattern) in enumerate(GAIT_SYNERGIES):
        c = center + rng.normal(0.0, 0.01)
        gain = rng.uniform(0.85, 1.0)
        # wrap the bump around the cycle boundary
        d = np.minimum(np.abs(phase - c), 1.0 - np.abs(phase - c))
        W[:, k] = gain * np.exp(-((d / width) ** 2))
        H[k] = _gait_weight_row(pattern)
    data = W @ H
    data *= 0.9 / max(data.max(), 1e-9)
    data += rng.uniform(0.0, noise, data.shape)
    return ActivationMatrix(np.clip(data, 0.0, 1.0), list(M40_MUSCLE_NAMES))


def write_activation_csv(matrix: ActivationMatrix, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(matrix.muscle_names)
        for row in matrix.data:
            writer.writerow([f"{v:.8g}" for v in row])


def read_activation_csv(path) -> ActivationMatrix:
    from .errors import DataError
    path = Path(path)
    if not path.exists():
        raise DataError(f"activation file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise DataError(f"{path}: non-numeric value on line {line}") from None
    if not rows:
        raise DataError(f"{path}: no samples")
    data = np.asarray(rows)
    if data.shape[1] != len(header):
        raise DataError(f"{path}: ragged rows")
    try:
        return ActivationMatrix(data, header)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# walking trial
# ---------------------------------------------------------------------------

TRIAL_SCHEMA = {
    "columns": {
        "time": {"role": "time"},
        "grf_ap": {"role": "grf", "channel": "ap", "units": "N"},
        "grf_v": {"role": "grf", "channel": "vertical", "units": "N"},
        "hip_angle": {"role": "kinematics", "channel": "hip", "units": "deg"},
        "knee_angle": {"role": "kinematics", "channel": "knee", "units": "deg"},
        "ankle_angle": {"role": "kinematics", "channel": "ankle", "units": "deg"},
        "knee_moment": {"role": "kinetics", "channel": "knee_moment",
                        "units": "N.m/kg"},
    },
    "subject_mass": 70.0,
}


def synthetic_gait_trial_rows(seed: int = 0, n_strides: int = 12,
                              sample_rate: float = 1000.0,
                              stride_s: float = 1.1, mass: float = 70.0):
    """Stride-periodic walking channels with sensor-like noise.

    Returns (header, rows). The vertical GRF is the classic double bump with
    clean swing-phase zeros, so threshold heel-strike detection applies.
    """
    rng = np.random.default_rng(seed)
    period = int(round(stride_s * sample_rate))
    n = period * n_strides + period // 2
    t = np.arange(n) / sample_rate
    phase = (t / stride_s) % 1.0
    stance = phase < 0.62
    tau = np.where(stance, phase / 0.62, 0.0)
    weight = mass * 9.81

    grf_v = np.where(stance,
                     weight * (1.05 * np.sin(np.pi * tau)
                               + 0.35 * np.sin(3 * np.pi * tau)), 0.0)
    grf_v = np.maximum(grf_v + rng.normal(0, 1.0, n) * stance, 0.0)
    grf_ap = np.where(stance, 0.18 * weight * np.sin(2 * np.pi * tau) * -1.0, 0.0)
    hip = 25.0 * np.cos(2 * np.pi * phase) + 5.0
    knee = -(12.0 * _bump(phase, 0.15, 0.1) + 55.0 * _bump(phase, 0.75, 0.1))
    ankle = 8.0 * np.sin(2 * np.pi * phase) - 12.0 * _bump(phase, 0.58, 0.06)
    knee_moment = 0.5 * np.sin(2 * np.pi * phase) * stance

    for channel in (hip, knee, ankle, knee_moment):
        channel += rng.normal(0, 0.15, n)

    header = ["time", "grf_ap", "grf_v", "hip_angle", "knee_angle",
              "ankle_angle", "knee_moment"]
    columns = [t, grf_ap, grf_v, hip, knee, ankle, knee_moment]
    rows = [[f"{col[i]:.8g}" for col in columns] for i in range(n)]
    return header, rows


def write_gait_trial(path, schema_path=None, **kwargs):
    header, rows = synthetic_gait_trial_rows(**kwargs)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    if schema_path is not None:
        with open(schema_path, "w") as fh:
            json.dump(TRIAL_SCHEMA, fh, indent=1)


# ---------------------------------------------------------------------------
# reference dataset
# ---------------------------------------------------------------------------

#: Reference variables aligned with the rollout log channel names.
REFERENCE_VARIABLES = [
    {"name": "angle_hip_r_deg", "units": "deg", "emg": False},
    {"name": "angle_knee_r_deg", "units": "deg", "emg": False},
    {"name": "angle_ankle_r_deg", "units": "deg", "emg": False},
    {"name": "moment_hip_r_nmkg", "units": "N.m/kg", "emg": False},
    {"name": "moment_knee_r_nmkg", "units": "N.m/kg", "emg": False},
    {"name": "moment_ankle_r_nmkg", "units": "N.m/kg", "emg": False},
    {"name": "grf_r_ap_bw", "units": "BW", "emg": False},
    {"name": "grf_r_vertical_bw", "units": "BW", "emg": False},
    {"name": "act_soleus", "units": "", "emg": True},
    {"name": "act_gastrocnemius", "units": "", "emg": True},
    {"name": "act_tibialis_anterior", "units": "", "emg": True},
]


def _reference_templates(x, speed, slope_deg):
    """Speed- and slope-modulated gait waveforms on the 0-1 cycle axis."""
    s = (speed - 1.2) / 0.5
    g = slope_deg / 5.0
    return {
        "angle_hip_r_deg": (28.0 + 5.0 * s) * np.cos(2 * np.pi * x) + 4.0 + 3.0 * g,
        "angle_knee_r_deg": -((12.0 + 3.0 * s) * _bump(x, 0.15, 0.1)
                              + (55.0 + 6.0 * s) * _bump(x, 0.75, 0.1)),
        "angle_ankle_r_deg": 8.0 * np.sin(2 * np.pi * x)
        - (12.0 + 2.0 * s) * _bump(x, 0.58, 0.06) + 2.0 * g,
        "moment_hip_r_nmkg": (0.8 + 0.2 * s) * np.cos(2 * np.pi * x + 0.4),
        "moment_knee_r_nmkg": (0.5 + 0.1 * s) * _bump(x, 0.12, 0.08)
        - 0.3 * _bump(x, 0.45, 0.1),
        "moment_ankle_r_nmkg": -(1.4 + 0.2 * s + 0.2 * g) * _bump(x, 0.45, 0.12),
        "grf_r_ap_bw": np.where(
            x < 0.62,
            -0.18 * np.sin(2 * np.pi * np.minimum(x / 0.62, 1.0)), 0.0),
        "grf_r_vertical_bw": np.where(
            x < 0.62,
            (1.05 + 0.1 * s) * np.sin(np.pi * np.minimum(x / 0.62, 1.0))
            + 0.35 * np.sin(3 * np.pi * np.minimum(x / 0.62, 1.0)), 0.0),
        "act_soleus": _bump(x, 0.45, 0.12),
        "act_gastrocnemius": _bump(x, 0.42, 0.1),
        "act_tibialis_anterior": 0.8 * _bump(x, 0.02, 0.05)
        + 0.5 * _bump(x, 0.65, 0.08),
    }


def synthetic_reference_dataset(seed: int = 0, n_subjects: int = 8,
                                conditions=None, n_points: int = 101,
                                n_cycles: int = 4) -> BenchmarkDataset:
    """Reference dataset with inter-subject offsets and per-cycle noise."""
    rng = np.random.default_rng(seed)
    conditions = conditions or [
        {"name": "speed_1.2", "speed": 1.2, "slope_deg": 0.0}]
    subjects = [f"S{i + 1:02d}" for i in range(n_subjects)]
    x = np.linspace(0.0, 1.0, n_points)
    cycles = {}
    for condition in conditions:
        templates = _reference_templates(x, condition["speed"],
                                         condition.get("slope_deg", 0.0))
        for variable in REFERENCE_VARIABLES:
            name = variable["name"]
            scale = max(np.abs(templates[name]).max(), 0.1)
            for subject in subjects:
                offset = rng.normal(0.0, 0.08 * scale)
                gain = rng.uniform(0.9, 1.1)
                block = np.vstack([
                    gain * templates[name] + offset
                    + rng.normal(0.0, 0.03 * scale, n_points)
                    for _ in range(n_cycles)])
                cycles[(subject, condition["name"], name)] = block
    return BenchmarkDataset(subjects=subjects, conditions=list(conditions),
                            variables=list(REFERENCE_VARIABLES),
                            n_points=n_points, cycles=cycles)


def write_reference_dataset(out_dir, **kwargs) -> Path:
    dataset = synthetic_reference_dataset(**kwargs)
    save_reference_dataset(dataset, out_dir)
    return Path(out_dir)
