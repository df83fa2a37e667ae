import numpy as np
import pytest

from synloco.datasets import (
    M40_MUSCLE_NAMES,
    read_activation_csv,
    synthetic_activation_matrix,
    synthetic_gait_trial_rows,
    synthetic_reference_dataset,
    write_activation_csv,
)
from synloco.env.biped import PlanarBiped, load_model
from synloco.errors import DataError
from synloco.gaitdata import TimeSeries, detect_heel_strikes
from synloco.synergy import nmf, project_basis, vaf


def test_forty_muscle_names():
    assert len(M40_MUSCLE_NAMES) == 40
    assert len(set(M40_MUSCLE_NAMES)) == 40


def test_activation_matrix_properties():
    m = synthetic_activation_matrix(seed=0)
    assert m.data.shape == (1000, 40)
    assert m.data.min() >= 0.0 and m.data.max() <= 1.0
    again = synthetic_activation_matrix(seed=0)
    np.testing.assert_array_equal(m.data, again.data)
    other = synthetic_activation_matrix(seed=1)
    assert not np.array_equal(m.data, other.data)


def test_activation_matrix_is_near_rank_10():
    m = synthetic_activation_matrix(seed=3)
    basis = nmf(m, k=10, seed=0, max_iter=3000)
    assert vaf(m, basis.W @ basis.H) >= 0.99


def test_basis_projects_onto_planar_muscles():
    biped = PlanarBiped(load_model(None))
    basis = nmf(synthetic_activation_matrix(seed=0), k=10, seed=0, max_iter=500)
    projected = project_basis(basis, biped.muscle_map, biped.leg_muscle_names)
    assert projected.H.shape == (10, 8)
    assert projected.muscle_names == biped.leg_muscle_names
    # raw group means: peaks stay at or below the source scale
    assert np.all(projected.H.max(axis=1) <= 1.0 + 1e-12)
    assert np.all(projected.H.max(axis=1) > 0.0)


def test_activation_csv_round_trip(tmp_path):
    m = synthetic_activation_matrix(seed=5, n_samples=50)
    path = tmp_path / "act.csv"
    write_activation_csv(m, path)
    back = read_activation_csv(path)
    assert back.muscle_names == m.muscle_names
    np.testing.assert_allclose(back.data, m.data, atol=1e-7)


def test_activation_csv_errors(tmp_path):
    with pytest.raises(DataError, match="not found"):
        read_activation_csv(tmp_path / "absent.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n0.1,oops\n")
    with pytest.raises(DataError, match="line 2"):
        read_activation_csv(bad)


def test_gait_trial_has_detectable_strides():
    # the trial carries a half-stride tail, so n_strides full cycles come
    # from n_strides + 1 heel strikes
    header, rows = synthetic_gait_trial_rows(seed=0, n_strides=6)
    grf_v = np.array([float(r[header.index("grf_v")]) for r in rows])
    series = TimeSeries(1000.0, grf_v, "vertical", "N")
    events = detect_heel_strikes(series, threshold=15.0)
    assert len(events) == 7
    spacing = np.diff(events)
    assert np.all(np.abs(spacing - 1100) <= 5)


def test_reference_dataset_shape_and_determinism():
    conditions = [{"name": "speed_1.0", "speed": 1.0, "slope_deg": 0.0}]
    a = synthetic_reference_dataset(seed=2, n_subjects=5, conditions=conditions)
    b = synthetic_reference_dataset(seed=2, n_subjects=5, conditions=conditions)
    assert a.subjects == [f"S{i:02d}" for i in range(1, 6)]
    key = ("S01", "speed_1.0", "grf_r_vertical_bw")
    np.testing.assert_array_equal(a.cycles[key], b.cycles[key])
    assert a.cycles[key].shape == (4, 101)
    assert a.is_emg("act_soleus")
