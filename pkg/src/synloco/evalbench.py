"""Quantitative gait comparison against reference human datasets.

The central quantity is the RMSE ratio: the RMSE between a simulated mean
cycle and each subject's mean cycle, averaged over subjects, divided by the
mean RMSE over all unordered subject pairs (the cross-human baseline). A
ratio near 1 means simulation error at the level of inter-subject
variability. Pearson correlations are computed per subject and averaged.
Metrics are reported per variable, condition, and gait phase (loading
response, mid-stance, pre-swing, swing).

Reference datasets live in a directory of per-subject cycle CSVs plus a JSON
manifest declaring subjects, conditions, and variables. Muscle-activity
variables are flagged "emg" in the manifest; both simulated and reference
curves for those are peak-normalized before comparison (the RVC convention:
each source is scaled by its own maximum).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import DataError
from .gaitdata import read_cycles_csv

PHASE_NAMES = ("loading_response", "mid_stance", "pre_swing", "swing")
DEFAULT_PHASE_BOUNDARIES = (10.0, 50.0, 60.0)
DEFAULT_THRESHOLDS = (2.0, 3.0, 5.0)


# ---------------------------------------------------------------------------
# scalar metrics
# ---------------------------------------------------------------------------

def rmse(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def pearson_r(a, b) -> float:
    """Sample Pearson correlation; raises on zero variance."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size < 3:
        raise ValueError("need at least 3 samples for a correlation")
    da = a - a.mean()
    db = b - b.mean()
    va = float(np.dot(da, da))
    vb = float(np.dot(db, db))
    if va == 0.0 or vb == 0.0:
        raise ValueError("zero variance input")
    return float(np.dot(da, db) / math.sqrt(va * vb))


def phase_partition(axis, boundaries=DEFAULT_PHASE_BOUNDARIES) -> list:
    """Split a 0-100% cycle axis into four contiguous index ranges.

    axis is either the percent array or the point count of a normalized
    cycle. Boundaries are interior percentages; the ranges are half-open
    except the last, which includes 100%. Returns [(name, slice), ...].
    """
    if isinstance(axis, (int, np.integer)):
        n = int(axis)
        percent = np.linspace(0.0, 100.0, n)
    else:
        percent = np.asarray(axis, dtype=float)
        n = percent.size
    if sorted(boundaries) != list(boundaries) or len(boundaries) != 3:
        raise ValueError("boundaries must be three increasing percentages")
    edges = (0.0, *boundaries, 100.0)
    ranges = []
    for k, name in enumerate(PHASE_NAMES):
        lo, hi = edges[k], edges[k + 1]
        if k < len(PHASE_NAMES) - 1:
            mask = (percent >= lo) & (percent < hi)
        else:
            mask = (percent >= lo) & (percent <= hi)
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            raise ValueError(f"phase {name} is empty for these boundaries")
        ranges.append((name, slice(int(idx[0]), int(idx[-1]) + 1)))
    return ranges


# ---------------------------------------------------------------------------
# reference dataset
# ---------------------------------------------------------------------------

@dataclass
class BenchmarkDataset:
    """Per-subject, per-condition normalized cycles for a set of variables."""

    subjects: list
    conditions: list                  # dicts: name, speed, slope_deg
    variables: list                   # dicts: name, units, emg
    n_points: int
    cycles: dict                      # (subject, condition, variable) -> (n_cycles, n_points)

    def __post_init__(self):
        for key, arr in self.cycles.items():
            if arr.ndim != 2 or arr.shape[1] != self.n_points:
                raise DataError(f"cycles for {key} must be (n, {self.n_points})")

    @property
    def condition_names(self):
        return [c["name"] for c in self.conditions]

    @property
    def variable_names(self):
        return [v["name"] for v in self.variables]

    def is_emg(self, variable: str) -> bool:
        for v in self.variables:
            if v["name"] == variable:
                return bool(v.get("emg", False))
        raise KeyError(variable)

    def subject_mean(self, subject: str, condition: str, variable: str) -> np.ndarray:
        return self.cycles[(subject, condition, variable)].mean(axis=0)


def save_reference_dataset(dataset: BenchmarkDataset, out_dir):
    """Write the manifest plus one cycles CSV per subject and condition."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": "synloco-reference",
        "version": 1,
        "n_points": dataset.n_points,
        "subjects": dataset.subjects,
        "conditions": dataset.conditions,
        "variables": dataset.variables,
        "path_template": "{subject}/{condition}.csv",
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
    percent = np.linspace(0.0, 100.0, dataset.n_points)
    for subject in dataset.subjects:
        (out_dir / subject).mkdir(exist_ok=True)
        for condition in dataset.condition_names:
            path = out_dir / subject / f"{condition}.csv"
            names = dataset.variable_names
            n_cycles = dataset.cycles[(subject, condition, names[0])].shape[0]
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["cycle", "percent_gait"] + names)
                for ci in range(n_cycles):
                    for i in range(dataset.n_points):
                        row = [ci, f"{percent[i]:.6g}"]
                        row += [repr(float(dataset.cycles[(subject, condition, v)][ci, i]))
                                for v in names]
                        writer.writerow(row)


def load_reference_dataset(path) -> BenchmarkDataset:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"reference dataset manifest not found: {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "synloco-reference":
        raise DataError(f"{manifest_path}: not a reference dataset manifest")
    template = manifest.get("path_template", "{subject}/{condition}.csv")
    cycles = {}
    for subject in manifest["subjects"]:
        for condition in manifest["conditions"]:
            file = path / template.format(subject=subject, condition=condition["name"])
            if not file.exists():
                raise DataError(f"missing reference cycles file: {file}")
            per_cycle = read_cycles_csv(file)
            for variable in manifest["variables"]:
                name = variable["name"]
                try:
                    arr = np.vstack([c[name] for c in per_cycle])
                except KeyError:
                    raise DataError(
                        f"{file}: missing variable column {name!r}") from None
                cycles[(subject, condition["name"], name)] = arr
    return BenchmarkDataset(
        subjects=list(manifest["subjects"]),
        conditions=list(manifest["conditions"]),
        variables=list(manifest["variables"]),
        n_points=int(manifest["n_points"]),
        cycles=cycles,
    )


# ---------------------------------------------------------------------------
# cross-human baseline and ratios
# ---------------------------------------------------------------------------

def cross_human_pairs(dataset: BenchmarkDataset, variable: str, condition: str,
                      indices: slice | None = None) -> list:
    """RMSE for every unordered pair of subject-mean cycles."""
    if len(dataset.subjects) < 2:
        raise ValueError("need at least 2 subjects for a cross-human baseline")
    means = {s: dataset.subject_mean(s, condition, variable)
             for s in dataset.subjects}
    if indices is not None:
        means = {s: m[indices] for s, m in means.items()}
    return [rmse(means[a], means[b])
            for a, b in combinations(dataset.subjects, 2)]


def cross_human_baseline(dataset: BenchmarkDataset, variable: str,
                         condition: str, indices: slice | None = None) -> float:
    """Mean RMSE over all n(n-1)/2 subject pairs."""
    return float(np.mean(cross_human_pairs(dataset, variable, condition, indices)))


def rmse_ratio(sim_mean_cycle, dataset: BenchmarkDataset, variable: str,
               condition: str, indices: slice | None = None,
               numerator: str = "per_subject") -> float:
    """Simulation-versus-human RMSE normalized by the cross-human baseline.

    numerator "per_subject" (default) averages the RMSE against each
    subject's mean cycle; "grand_mean" compares against the across-subject
    grand mean instead.
    """
    baseline = cross_human_baseline(dataset, variable, condition, indices)
    if baseline <= 0.0:
        raise ValueError("degenerate dataset: zero cross-human baseline")
    sim = np.asarray(sim_mean_cycle, dtype=float)
    if indices is not None:
        sim = sim[indices]
    means = [dataset.subject_mean(s, condition, variable) for s in dataset.subjects]
    if indices is not None:
        means = [m[indices] for m in means]
    if numerator == "per_subject":
        numer = float(np.mean([rmse(sim, m) for m in means]))
    elif numerator == "grand_mean":
        numer = rmse(sim, np.mean(means, axis=0))
    else:
        raise ValueError(f"unknown numerator mode {numerator!r}")
    return numer / baseline


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass
class MetricEntry:
    variable: str
    condition: str
    phase: str
    rmse: float
    rmse_ratio: float
    pearson_r: float
    baseline_rmse: float
    n_subjects: int
    n_excluded_correlations: int = 0


@dataclass
class MetricReport:
    entries: list
    thresholds: tuple = DEFAULT_THRESHOLDS
    boundaries: tuple = DEFAULT_PHASE_BOUNDARIES
    numerator: str = "per_subject"
    failed_conditions: list = field(default_factory=list)

    def threshold_counts(self) -> dict:
        return {t: sum(1 for e in self.entries if e.rmse_ratio > t)
                for t in self.thresholds}

    def entry(self, variable: str, condition: str, phase: str) -> MetricEntry:
        for e in self.entries:
            if (e.variable, e.condition, e.phase) == (variable, condition, phase):
                return e
        raise KeyError((variable, condition, phase))


def _peak_normalize(curve) -> np.ndarray:
    curve = np.asarray(curve, dtype=float)
    peak = np.max(np.abs(curve))
    return curve / peak if peak > 0 else curve


def build_report(sim_cycles: dict, dataset: BenchmarkDataset,
                 variable_map: dict | None = None,
                 boundaries=DEFAULT_PHASE_BOUNDARIES,
                 thresholds=DEFAULT_THRESHOLDS,
                 numerator: str = "per_subject") -> MetricReport:
    """Metrics for every variable x condition x phase.

    sim_cycles maps condition name -> {sim channel -> mean cycle array};
    variable_map sends each reference variable to the sim channel it compares
    with (identity when omitted). Conditions missing from sim_cycles, or with
    empty cycles, are reported as failed. EMG-flagged variables are peak
    normalized on both sides before comparison.
    """
    entries = []
    failed = []
    phases = phase_partition(dataset.n_points, boundaries)
    variable_map = variable_map or {v: v for v in dataset.variable_names}
    for condition in dataset.condition_names:
        sim = sim_cycles.get(condition)
        if not sim:
            failed.append(condition)
            continue
        for variable in dataset.variable_names:
            channel = variable_map.get(variable, variable)
            if channel not in sim:
                raise DataError(
                    f"simulated cycles for {condition!r} lack channel {channel!r}")
            sim_curve = np.asarray(sim[channel], dtype=float)
            if sim_curve.size != dataset.n_points:
                raise DataError(
                    f"simulated cycle for {channel!r} has {sim_curve.size} points, "
                    f"reference uses {dataset.n_points}")
            emg = dataset.is_emg(variable)
            if emg:
                sim_curve = _peak_normalize(sim_curve)
            subject_means = {}
            for subject in dataset.subjects:
                mean = dataset.subject_mean(subject, condition, variable)
                subject_means[subject] = _peak_normalize(mean) if emg else mean
            for phase, window in phases:
                sim_seg = sim_curve[window]
                segs = {s: m[window] for s, m in subject_means.items()}
                pair_rmses = [rmse(segs[a], segs[b])
                              for a, b in combinations(dataset.subjects, 2)]
                baseline = float(np.mean(pair_rmses))
                if numerator == "per_subject":
                    numer = float(np.mean([rmse(sim_seg, m) for m in segs.values()]))
                else:
                    numer = rmse(sim_seg, np.mean(list(segs.values()), axis=0))
                ratio = numer / baseline if baseline > 0 else math.inf
                correlations = []
                excluded = 0
                for m in segs.values():
                    try:
                        correlations.append(pearson_r(sim_seg, m))
                    except ValueError:
                        excluded += 1
                mean_corr = float(np.mean(correlations)) if correlations else math.nan
                entries.append(MetricEntry(
                    variable=variable, condition=condition, phase=phase,
                    rmse=numer, rmse_ratio=ratio, pearson_r=mean_corr,
                    baseline_rmse=baseline, n_subjects=len(dataset.subjects),
                    n_excluded_correlations=excluded))
    return MetricReport(entries=entries, thresholds=tuple(thresholds),
                        boundaries=tuple(boundaries), numerator=numerator,
                        failed_conditions=failed)


def emit_report(report: MetricReport, path, fmt: str = "both",
                heatmap_path=None):
    """Write the report as CSV and/or JSON; optionally render a ratio heatmap."""
    path = Path(path)
    written = []
    if fmt in ("csv", "both"):
        csv_path = path.with_suffix(".csv")
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["variable", "condition", "phase", "rmse",
                             "rmse_ratio", "pearson_r", "baseline_rmse",
                             "n_subjects", "n_excluded_correlations"])
            for e in report.entries:
                writer.writerow([e.variable, e.condition, e.phase,
                                 repr(e.rmse), repr(e.rmse_ratio),
                                 repr(e.pearson_r), repr(e.baseline_rmse),
                                 e.n_subjects, e.n_excluded_correlations])
        written.append(csv_path)
    if fmt in ("json", "both"):
        json_path = path.with_suffix(".json")
        payload = {
            "format": "synloco-report",
            "version": 1,
            "thresholds": list(report.thresholds),
            "boundaries": list(report.boundaries),
            "numerator": report.numerator,
            "failed_conditions": report.failed_conditions,
            "threshold_counts": {str(t): c
                                 for t, c in report.threshold_counts().items()},
            "entries": [asdict(e) for e in report.entries],
        }
        with open(json_path, "w") as fh:
            json.dump(payload, fh, indent=1)
        written.append(json_path)
    if heatmap_path is not None:
        render_heatmap(report, heatmap_path)
        written.append(Path(heatmap_path))
    return written


def load_report(path) -> MetricReport:
    path = Path(path)
    if not path.exists():
        raise DataError(f"report file not found: {path}")
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != "synloco-report":
        raise DataError(f"{path}: not a metric report")
    entries = [MetricEntry(**e) for e in payload["entries"]]
    return MetricReport(entries=entries, thresholds=tuple(payload["thresholds"]),
                        boundaries=tuple(payload["boundaries"]),
                        numerator=payload["numerator"],
                        failed_conditions=list(payload["failed_conditions"]))


def render_heatmap(report: MetricReport, path):
    """RMSE-ratio heatmap: variables x phases, one panel per condition."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    conditions = sorted({e.condition for e in report.entries})
    variables = sorted({e.variable for e in report.entries})
    if not conditions:
        raise ValueError("empty report: nothing to render")
    fig, axes = plt.subplots(1, len(conditions),
                             figsize=(4 * len(conditions) + 2, 0.5 * len(variables) + 2),
                             squeeze=False)
    for ax, condition in zip(axes[0], conditions):
        grid = np.full((len(variables), len(PHASE_NAMES)), np.nan)
        for e in report.entries:
            if e.condition == condition:
                grid[variables.index(e.variable), PHASE_NAMES.index(e.phase)] = \
                    e.rmse_ratio
        im = ax.imshow(grid, cmap="magma_r", vmin=0.0,
                       vmax=max(5.0, np.nanmax(grid)))
        ax.set_xticks(range(len(PHASE_NAMES)),
                      [p.replace("_", "\n") for p in PHASE_NAMES], fontsize=7)
        ax.set_yticks(range(len(variables)), variables, fontsize=7)
        ax.set_title(condition, fontsize=9)
        for i in range(len(variables)):
            for j in range(len(PHASE_NAMES)):
                if np.isfinite(grid[i, j]):
                    ax.text(j, i, f"{grid[i, j]:.2f}", ha="center", va="center",
                            fontsize=6,
                            color="white" if grid[i, j] > 2.5 else "black")
        fig.colorbar(im, ax=ax, shrink=0.7)
    fig.suptitle("RMSE ratio vs cross-human variability")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
