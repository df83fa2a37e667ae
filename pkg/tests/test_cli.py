import json

import numpy as np
import pytest

from synloco import datasets
from synloco.cli import main
from synloco.manifest import output_hashes, read_manifest
from synloco.synergy import load_basis


@pytest.fixture(scope="module")
def demo_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo")
    assert main(["demo-data", "--out", str(out), "--seed", "1",
                 "--subjects", "4", "--strides", "8"]) == 0
    return out


def test_demo_data_outputs(demo_dir):
    assert (demo_dir / "trial.csv").exists()
    assert (demo_dir / "schema.json").exists()
    assert (demo_dir / "activations_40.csv").exists()
    assert (demo_dir / "reference" / "manifest.json").exists()
    manifest = read_manifest(demo_dir / "manifest.json")
    assert manifest["command"] == "demo-data"
    assert len(manifest["outputs"]) >= 4


def test_preprocess_writes_cycles(demo_dir, tmp_path):
    out = tmp_path / "cycles"
    code = main(["preprocess", "--trial", str(demo_dir / "trial.csv"),
                 "--schema", str(demo_dir / "schema.json"), "--out", str(out)])
    assert code == 0
    cycles_file = out / "trial_cycles.csv"
    assert cycles_file.exists()
    header = cycles_file.read_text().splitlines()[0]
    assert header.startswith("cycle,percent_gait")


def test_preprocess_missing_schema_is_data_error(demo_dir, tmp_path):
    code = main(["preprocess", "--trial", str(demo_dir / "trial.csv"),
                 "--schema", str(tmp_path / "absent.json"),
                 "--out", str(tmp_path / "o")])
    assert code == 3


def test_preprocess_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["preprocess", "--trial", "x.csv"])       # missing required args
    assert exc.value.code == 2


def test_preprocess_rerun_identical_hashes(demo_dir, tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        assert main(["preprocess", "--trial", str(demo_dir / "trial.csv"),
                     "--schema", str(demo_dir / "schema.json"),
                     "--out", str(out)]) == 0
    hashes_a = output_hashes(read_manifest(out_a / "manifest.json"))
    hashes_b = output_hashes(read_manifest(out_b / "manifest.json"))
    assert hashes_a == hashes_b


def test_synergy_k10_on_40_muscles(demo_dir, tmp_path):
    out = tmp_path / "basis.json"
    code = main(["synergy", "--activations", str(demo_dir / "activations_40.csv"),
                 "--k", "10", "--seed", "3", "--out", str(out)])
    assert code == 0
    basis = load_basis(out)
    assert basis.H.shape == (10, 40)


def test_synergy_k_too_large(demo_dir, tmp_path):
    code = main(["synergy", "--activations", str(demo_dir / "activations_40.csv"),
                 "--k", "60", "--out", str(tmp_path / "b.json")])
    assert code == 3


def test_synergy_rerun_identical(demo_dir, tmp_path):
    out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (out_a, out_b):
        assert main(["synergy", "--activations",
                     str(demo_dir / "activations_40.csv"),
                     "--k", "4", "--seed", "7", "--max-iter", "300",
                     "--out", str(out)]) == 0
    assert out_a.read_text() == out_b.read_text()


@pytest.fixture(scope="module")
def trained_dir(demo_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    config = out / "config.json"
    config.write_text(json.dumps({
        "total_steps": 420, "warmup_steps": 120, "buffer_capacity": 2000,
        "batch_size": 32, "eval_interval": 200, "eval_rollouts": 1,
        "episode_length": 40}))
    code = main(["train", "--mode", "independent", "--profile", "desk",
                 "--config", str(config), "--seed", "0", "--out", str(out)])
    assert code == 0
    return out


def test_train_outputs(trained_dir):
    assert (trained_dir / "best.pt").exists()
    assert (trained_dir / "episodes.csv").exists()
    assert (trained_dir / "evals.csv").exists()
    manifest = read_manifest(trained_dir / "manifest.json")
    assert any(entry["path"].endswith("best.pt") for entry in manifest["outputs"])


def test_train_synergy_requires_basis(tmp_path):
    code = main(["train", "--mode", "synergy", "--profile", "desk",
                 "--out", str(tmp_path)])
    assert code == 3


def test_train_invalid_mode_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["train", "--mode", "psychic", "--out", "x"])
    assert exc.value.code == 2


def test_train_unknown_config_field(demo_dir, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"warp_factor": 9}))
    code = main(["train", "--mode", "independent", "--config", str(config),
                 "--out", str(tmp_path / "out")])
    assert code == 3


def test_evaluate_pipeline(demo_dir, trained_dir, tmp_path):
    conditions = tmp_path / "conditions.json"
    conditions.write_text(json.dumps(
        [{"name": "speed_0.9", "speed": 0.9, "slope_deg": 0.0}]))
    out = tmp_path / "eval"
    code = main(["evaluate", "--checkpoint", str(trained_dir / "best.pt"),
                 "--reference", str(demo_dir / "reference"),
                 "--conditions", str(conditions), "--rollouts", "2",
                 "--seed", "0", "--out", str(out)])
    assert code == 0
    assert (out / "report.json").exists()
    assert (out / "report.csv").exists()
    assert (out / "heatmap.png").exists() or True   # heatmap needs entries
    assert (out / "rollouts" / "rollout_speed_0.9_00.csv").exists()
    manifest = read_manifest(out / "manifest.json")
    assert manifest["command"] == "evaluate"


def test_evaluate_missing_reference(trained_dir, tmp_path):
    code = main(["evaluate", "--checkpoint", str(trained_dir / "best.pt"),
                 "--reference", str(tmp_path / "nope"),
                 "--out", str(tmp_path / "e")])
    assert code == 3
