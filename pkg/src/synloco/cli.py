"""Command-line pipeline: preprocess -> synergy -> train -> evaluate.

Every subcommand writes a manifest.json listing the content hash of each
produced file; re-running with the same inputs and seeds reproduces the
hashes. Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical
failure. Heavy linear algebra honors the SYNLOCO_NUM_THREADS environment
variable.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, datasets, evalbench, gaitdata, synergy
from .errors import DataError, NumericalError
from .manifest import write_manifest
from .trainer import desk_profile, evaluate_policy, paper_condition_grid, paper_profile, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix in (".toml", ".tml"):
        try:
            import tomllib as toml
        except ImportError:
            import tomli as toml
        return toml.loads(text)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"config {path} is not valid JSON: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_preprocess(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    schema = gaitdata.load_schema(args.schema)
    outputs = []
    for trial_path in args.trial:
        trial = gaitdata.load_trial(trial_path, schema)
        filtered = gaitdata.filter_trial(trial, cutoff=args.cutoff,
                                         order=args.order)
        if "vertical" not in filtered.grf:
            raise DataError(f"{trial_path}: schema maps no 'vertical' GRF channel")
        events = gaitdata.detect_heel_strikes(filtered.grf["vertical"],
                                              threshold=args.threshold)
        if len(events) < 2:
            raise DataError(
                f"{trial_path}: found {len(events)} heel strikes, need >= 2")
        cycles = [gaitdata.time_normalize(c, args.points)
                  for c in gaitdata.segment_cycles(filtered, events)]
        out_path = out_dir / f"{Path(trial_path).stem}_cycles.csv"
        gaitdata.cycles_to_csv(cycles, out_path)
        outputs.append(out_path)
        print(f"{trial_path}: {len(events)} heel strikes -> "
              f"{len(cycles)} cycles -> {out_path}")
    write_manifest(out_dir, "preprocess", vars(args), seeds=[],
                   outputs=outputs, config_paths=[args.schema])
    return EXIT_OK


def cmd_synergy(args) -> int:
    matrices = [datasets.read_activation_csv(p) for p in args.activations]
    names = matrices[0].muscle_names
    for m, path in zip(matrices[1:], args.activations[1:]):
        if m.muscle_names != names:
            raise DataError(f"{path}: muscle columns differ from the first file")
    stacked = synergy.ActivationMatrix(
        np.vstack([m.data for m in matrices]), names)
    if args.k > stacked.n_muscles:
        raise DataError(f"k={args.k} exceeds the {stacked.n_muscles} muscles")

    best = None
    for restart in range(args.restarts):
        basis = synergy.nmf(stacked, k=args.k, seed=args.seed + restart,
                            max_iter=args.max_iter, tol=args.tol)
        if best is None or basis.final_residual < best.final_residual:
            best = basis
    quality = synergy.vaf(stacked, best.W @ best.H)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    synergy.save_basis(best, out_path)
    print(f"k={args.k} on {stacked.n_samples}x{stacked.n_muscles}: "
          f"residual {best.final_residual:.6g}, VAF {quality:.4f}, "
          f"converged={best.converged} -> {out_path}")
    write_manifest(out_path.parent, "synergy", vars(args),
                   seeds=[args.seed], outputs=[out_path])
    return EXIT_OK


def cmd_train(args) -> int:
    profile = desk_profile if args.profile == "desk" else paper_profile
    overrides = _load_config_file(args.config) if args.config else {}
    if args.steps is not None:
        overrides["total_steps"] = args.steps
    overrides["controller_mode"] = args.mode
    overrides["seed"] = args.seed
    try:
        config = profile(**{k: tuple(v) if isinstance(v, list) else v
                            for k, v in overrides.items()})
    except TypeError as exc:
        raise DataError(f"unknown config field: {exc}") from exc

    basis = None
    if args.mode == "synergy":
        if not args.basis:
            raise DataError("--basis is required for synergy mode")
        basis = synergy.load_basis(args.basis)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_used = out_dir / "config_used.json"
    with open(config_used, "w") as fh:
        payload = {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in vars(config).items()
                   if not k.startswith("reward")}
        json.dump(payload, fh, indent=1, default=str)

    if args.resume and not Path(args.resume).exists():
        raise DataError(f"resume checkpoint not found: {args.resume}")
    result = train(config, basis=basis, out_dir=out_dir, resume_from=args.resume)
    outputs = [config_used, result.episodes_log, result.evals_log,
               result.best_checkpoint, result.final_checkpoint]
    outputs += sorted(out_dir.glob("ckpt_*.pt"))
    write_manifest(out_dir, "train", vars(args), seeds=[args.seed],
                   outputs=outputs,
                   config_paths=[args.config] if args.config else [])
    returns = result.episode_returns
    print(f"trained {config.total_steps} steps ({len(returns)} episodes), "
          f"best eval return {result.best_eval_return:.2f} -> {result.best_checkpoint}")
    return EXIT_OK


def _conditions_from_arg(arg) -> list:
    if arg is None:
        return paper_condition_grid()
    path = Path(arg)
    if not path.exists():
        raise DataError(f"conditions file not found: {path}")
    with open(path) as fh:
        conditions = json.load(fh)
    for c in conditions:
        if "name" not in c or "speed" not in c:
            raise DataError(f"condition entry missing name/speed: {c}")
    return conditions


def cmd_evaluate(args) -> int:
    reference_dir = Path(args.reference)
    if not reference_dir.exists():
        raise DataError(f"reference dataset directory not found: {reference_dir}")
    dataset = evalbench.load_reference_dataset(reference_dir)
    conditions = _conditions_from_arg(args.conditions)

    out_dir = Path(args.out)
    rollout_dir = out_dir / "rollouts"
    rollouts = evaluate_policy(args.checkpoint, conditions=conditions,
                               n_rollouts=args.rollouts, out_dir=rollout_dir,
                               seed=args.seed, n_points=dataset.n_points,
                               channels=[v["name"] for v in dataset.variables],
                               log_observations=args.log_obs)
    sim_cycles = {name: entry["mean_cycle"]
                  for name, entry in rollouts["conditions"].items()
                  if not entry["failed"]}
    for name, entry in rollouts["conditions"].items():
        if entry["failed"]:
            print(f"condition {name}: policy fell in every rollout, "
                  "no strides extracted", file=sys.stderr)
    report = evalbench.build_report(sim_cycles, dataset,
                                    numerator=args.numerator)
    written = evalbench.emit_report(report, out_dir / "report", fmt="both",
                                    heatmap_path=out_dir / "heatmap.png")
    counts = report.threshold_counts()
    print(f"report: {len(report.entries)} entries; ratios > "
          + ", ".join(f"{t}: {c}" for t, c in counts.items()))
    outputs = list(written) + sorted(rollout_dir.glob("rollout_*.csv"))
    outputs += sorted(rollout_dir.glob("rollout_*.jsonl"))
    write_manifest(out_dir, "evaluate", vars(args), seeds=[args.seed],
                   outputs=outputs)
    return EXIT_OK


def cmd_demo_data(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trial = out_dir / "trial.csv"
    schema = out_dir / "schema.json"
    datasets.write_gait_trial(trial, schema_path=schema, seed=args.seed,
                              n_strides=args.strides)
    activations = out_dir / "activations_40.csv"
    datasets.write_activation_csv(
        datasets.synthetic_activation_matrix(seed=args.seed), activations)
    conditions = [{"name": "speed_0.9", "speed": 0.9, "slope_deg": 0.0},
                  {"name": "speed_1.2", "speed": 1.2, "slope_deg": 0.0}]
    reference = out_dir / "reference"
    datasets.write_reference_dataset(reference, seed=args.seed,
                                     n_subjects=args.subjects,
                                     conditions=conditions)
    outputs = [trial, schema, activations,
               *sorted(reference.rglob("*.csv")), reference / "manifest.json"]
    write_manifest(out_dir, "demo-data", vars(args), seeds=[args.seed],
                   outputs=outputs)
    print(f"demo corpus -> {out_dir} (trial, schema, activations, reference/)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synloco",
        description="Synergy-constrained locomotion pipeline: preprocess gait "
                    "data, extract synergies, train controllers, benchmark gait.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="filter and segment trial CSVs into "
                                          "normalized gait cycles")
    p.add_argument("--trial", nargs="+", required=True, help="trial CSV file(s)")
    p.add_argument("--schema", required=True, help="column-map schema JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--cutoff", type=float, default=12.0, help="low-pass cutoff, Hz")
    p.add_argument("--order", type=int, default=4, help="Butterworth order per pass")
    p.add_argument("--threshold", type=float, default=15.0,
                   help="heel-strike vertical GRF threshold, N")
    p.add_argument("--points", type=int, default=101,
                   help="samples per normalized cycle")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("synergy", help="factorize activation matrices into a "
                                       "synergy basis")
    p.add_argument("--activations", nargs="+", required=True,
                   help="activation CSV file(s), concatenated in time")
    p.add_argument("--k", type=int, default=10, help="number of synergies")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--restarts", type=int, default=1,
                   help="seeds tried; lowest residual kept")
    p.add_argument("--out", required=True, help="basis JSON path")
    p.set_defaults(func=cmd_synergy)

    p = sub.add_parser("train", help="train a locomotion policy")
    p.add_argument("--mode", choices=("synergy", "independent"), required=True)
    p.add_argument("--profile", choices=("desk", "paper"), default="desk")
    p.add_argument("--config", help="JSON/TOML file overriding profile fields")
    p.add_argument("--basis", help="synergy basis JSON (synergy mode)")
    p.add_argument("--steps", type=int, help="override total_steps")
    p.add_argument("--resume", help="checkpoint to continue from "
                                    "(step counter carries over)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="roll out a checkpoint and benchmark "
                                        "against a reference dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--reference", required=True,
                   help="reference dataset directory (manifest.json inside)")
    p.add_argument("--conditions",
                   help="JSON file of conditions; default: the full paper grid")
    p.add_argument("--rollouts", type=int, default=10)
    p.add_argument("--numerator", choices=("per_subject", "grand_mean"),
                   default="per_subject")
    p.add_argument("--log-obs", action="store_true",
                   help="also write raw observation/action vectors (JSON lines)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("demo-data", help="generate the synthetic demo corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subjects", type=int, default=8)
    p.add_argument("--strides", type=int, default=12)
    p.set_defaults(func=cmd_demo_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
