"""Ingest, filter, and segment gait recordings into normalized gait cycles.

Walking trials arrive as CSV files (header row, one time column). A JSON
schema maps columns onto channel roles. Filtering is zero-phase
forward-backward Butterworth: the quoted filter order is the per-pass order,
so the effective magnitude response order is doubled by the backward pass.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import butter, filtfilt, lfilter

from .errors import DataError

#: Channel roles a schema may assign to a CSV column.
CHANNEL_ROLES = ("time", "kinematics", "kinetics", "grf", "activation", "ignore")

DEFAULT_CUTOFF_HZ = 12.0
DEFAULT_FILTER_ORDER = 4
DEFAULT_HEEL_THRESHOLD_N = 15.0
DEFAULT_REFRACTORY_S = 0.4
DEFAULT_CYCLE_POINTS = 101


@dataclass
class TimeSeries:
    """Uniformly sampled single-channel signal."""

    sample_rate: float
    values: np.ndarray
    channel_name: str = ""
    units: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")
        if self.values.ndim != 1 or self.values.size < 2:
            raise ValueError("values must be 1-d with at least 2 samples")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"channel {self.channel_name!r} has non-finite samples")

    def __len__(self):
        return self.values.size

    @property
    def duration(self) -> float:
        return (self.values.size - 1) / self.sample_rate


@dataclass
class GaitTrial:
    """One walking trial: channel maps plus an optional activation matrix.

    All channels share a common time base. Activations, when present, are a
    T x m matrix with entries in [0, 1] and one column per muscle name.
    """

    kinematics: dict = field(default_factory=dict)
    kinetics: dict = field(default_factory=dict)
    grf: dict = field(default_factory=dict)
    activations: np.ndarray | None = None
    muscle_names: list = field(default_factory=list)
    subject_mass: float = math.nan
    sample_rate: float = math.nan

    def __post_init__(self):
        if self.activations is not None:
            self.activations = np.asarray(self.activations, dtype=float)
            if self.activations.min() < 0.0 or self.activations.max() > 1.0:
                raise ValueError("activations must lie in [0, 1]")

    def channels(self) -> dict:
        """All scalar channels in one flat name -> TimeSeries map."""
        merged = {}
        for group in (self.kinematics, self.kinetics, self.grf):
            for name, series in group.items():
                if name in merged:
                    raise ValueError(f"duplicate channel name {name!r}")
                merged[name] = series
        return merged


@dataclass
class GaitCycle:
    """One stride. Channels are raw slices until time_normalize is applied."""

    start_index: int
    end_index: int
    channels: dict
    n_points: int | None = None

    def __post_init__(self):
        if not self.start_index < self.end_index:
            raise ValueError("cycle start must precede end")
        if self.n_points is not None:
            for name, values in self.channels.items():
                if len(values) != self.n_points:
                    raise ValueError(
                        f"channel {name!r} has {len(values)} samples, expected {self.n_points}"
                    )


def load_schema(path) -> dict:
    """Read a column-map schema (JSON): column name -> role/channel/units."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"schema file not found: {path}")
    with open(path) as fh:
        try:
            schema = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"schema {path} is not valid JSON: {exc}") from exc
    if "columns" not in schema:
        raise DataError(f"schema {path} lacks a 'columns' map")
    for col, entry in schema["columns"].items():
        role = entry.get("role")
        if role not in CHANNEL_ROLES:
            raise DataError(f"schema column {col!r} has unknown role {role!r}")
    return schema


def load_trial(path, schema: dict) -> GaitTrial:
    """Load a trial CSV according to a schema.

    The schema is a dict with a "columns" map (CSV column -> {"role", "channel",
    "units"}) and optional "subject_mass". Exactly one column must carry the
    "time" role; the sample rate is inferred from it. Columns absent from the
    schema are ignored; schema columns missing from the file are an error.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"trial file not found: {path}")

    columns = schema["columns"]
    time_cols = [c for c, e in columns.items() if e["role"] == "time"]
    if len(time_cols) != 1:
        raise DataError(f"schema must name exactly one time column, got {time_cols}")
    time_col = time_cols[0]

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: no samples") from None
        header = [h.strip() for h in header]
        missing = [c for c in columns if c not in header]
        if missing:
            raise DataError(f"{path}: missing required column(s) {missing}")
        idx = {c: header.index(c) for c in columns if columns[c]["role"] != "ignore"}

        data = {c: [] for c in idx}
        for row_num, row in enumerate(reader, start=2):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            for col, j in idx.items():
                cell = row[j].strip() if j < len(row) else ""
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric cell at row {row_num}, column {col!r}: {cell!r}"
                    ) from None
                if math.isnan(value):
                    raise DataError(f"{path}: NaN at row {row_num}, column {col!r}")
                data[col].append(value)

    n = len(data[time_col])
    if n == 0:
        raise DataError(f"{path}: no samples")
    if n < 2:
        raise DataError(f"{path}: need at least 2 samples, got {n}")

    t = np.asarray(data[time_col])
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise DataError(f"{path}: time column {time_col!r} is not strictly increasing")
    sample_rate = 1.0 / float(np.median(dt))

    trial = GaitTrial(subject_mass=float(schema.get("subject_mass", math.nan)),
                      sample_rate=sample_rate)
    activation_cols = []
    for col, entry in columns.items():
        role = entry["role"]
        if role in ("time", "ignore"):
            continue
        channel = entry.get("channel", col)
        units = entry.get("units", "")
        if role == "activation":
            activation_cols.append((channel, col))
            continue
        series = TimeSeries(sample_rate, np.asarray(data[col]), channel, units)
        getattr(trial, role)[channel] = series

    if activation_cols:
        mat = np.column_stack([np.asarray(data[col]) for _, col in activation_cols])
        if mat.min() < 0.0 or mat.max() > 1.0:
            raise DataError(f"{path}: activation columns must lie in [0, 1]")
        trial.activations = mat
        trial.muscle_names = [name for name, _ in activation_cols]
    return trial


def lowpass_filter(series: TimeSeries, cutoff: float,
                   order: int = DEFAULT_FILTER_ORDER,
                   zero_phase: bool = True) -> TimeSeries:
    """Butterworth low-pass of one channel.

    zero_phase=True runs the filter forward and backward (no phase lag; the
    magnitude response of the given order applies twice). zero_phase=False is
    a single causal pass, matching the analytic per-pass response
    |H(f)| = (1 + (f/cutoff)^(2*order))^(-1/2).
    """
    if order < 2 or order % 2 != 0:
        raise ValueError(f"order must be even and >= 2, got {order}")
    nyquist = series.sample_rate / 2.0
    if not 0.0 < cutoff < nyquist:
        raise ValueError(f"cutoff {cutoff} Hz must lie in (0, Nyquist={nyquist} Hz)")
    b, a = butter(order, cutoff / nyquist, btype="low")
    if zero_phase:
        filtered = filtfilt(b, a, series.values)
    else:
        filtered = lfilter(b, a, series.values)
    return replace(series, values=filtered)


def filter_trial(trial: GaitTrial, cutoff: float = DEFAULT_CUTOFF_HZ,
                 order: int = DEFAULT_FILTER_ORDER) -> GaitTrial:
    """Apply the same zero-phase low-pass to every scalar channel.

    One cutoff is used for kinematics and GRFs alike.
    """
    out = GaitTrial(subject_mass=trial.subject_mass, sample_rate=trial.sample_rate,
                    activations=trial.activations, muscle_names=list(trial.muscle_names))
    for group in ("kinematics", "kinetics", "grf"):
        for name, series in getattr(trial, group).items():
            getattr(out, group)[name] = lowpass_filter(series, cutoff, order)
    return out


def detect_heel_strikes(vgrf: TimeSeries, threshold: float = DEFAULT_HEEL_THRESHOLD_N,
                        refractory_s: float = DEFAULT_REFRACTORY_S) -> list:
    """Indices where the vertical GRF first exceeds the threshold.

    An index i qualifies when vgrf[i] > threshold and vgrf[i-1] <= threshold.
    Crossings within the refractory window after an accepted event are
    discarded (sensor chatter around the threshold).
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    v = vgrf.values
    refractory = int(round(refractory_s * vgrf.sample_rate))
    events = []
    last = -1
    for i in range(1, v.size):
        if v[i] > threshold and v[i - 1] <= threshold:
            if last >= 0 and i - last < refractory:
                continue
            events.append(i)
            last = i
    return events


def segment_cycles(trial: GaitTrial, events) -> list:
    """Cut every channel into strides bounded by consecutive events.

    Cycle i spans events[i]..events[i+1] inclusive, so adjacent cycles share
    their boundary sample and endpoint normalization is exact.
    """
    events = list(events)
    if len(events) < 2:
        raise ValueError(f"need at least 2 events to segment, got {len(events)}")
    channels = trial.channels()
    cycles = []
    for start, end in zip(events[:-1], events[1:]):
        sliced = {name: s.values[start:end + 1].copy() for name, s in channels.items()}
        cycles.append(GaitCycle(start, end, sliced))
    return cycles


def time_normalize(cycle: GaitCycle, n_points: int = DEFAULT_CYCLE_POINTS) -> GaitCycle:
    """Resample each channel onto n_points equally spaced cycle fractions.

    Linear interpolation; the first and last samples are preserved exactly.
    """
    if n_points < 2:
        raise ValueError(f"n_points must be >= 2, got {n_points}")
    normalized = {}
    target = np.linspace(0.0, 1.0, n_points)
    for name, values in cycle.channels.items():
        source = np.linspace(0.0, 1.0, len(values))
        resampled = np.interp(target, source, values)
        resampled[0] = values[0]
        resampled[-1] = values[-1]
        normalized[name] = resampled
    return GaitCycle(cycle.start_index, cycle.end_index, normalized, n_points)


def cycles_to_csv(cycles, path):
    """Write normalized cycles as CSV with a percent_gait column.

    All cycles must be normalized to a common n_points. Rows are grouped by a
    leading `cycle` index column.
    """
    cycles = list(cycles)
    if not cycles:
        raise ValueError("no cycles to write")
    n_points = cycles[0].n_points
    if n_points is None:
        raise ValueError("cycles must be time-normalized before writing")
    names = sorted(cycles[0].channels)
    percent = np.linspace(0.0, 100.0, n_points)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cycle", "percent_gait"] + names)
        for ci, cycle in enumerate(cycles):
            if cycle.n_points != n_points or sorted(cycle.channels) != names:
                raise ValueError("cycles disagree on n_points or channel set")
            for i in range(n_points):
                row = [ci, f"{percent[i]:.6g}"]
                row += [repr(float(cycle.channels[name][i])) for name in names]
                writer.writerow(row)


def read_cycles_csv(path):
    """Inverse of cycles_to_csv: returns a list of channel dicts per cycle."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"cycles file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["cycle", "percent_gait"]:
            raise DataError(f"{path}: not a cycles CSV (header {header[:2]})")
        names = header[2:]
        rows = [(int(r[0]), [float(x) for x in r[1:]]) for r in reader if r]
    cycles = []
    for ci in sorted({ci for ci, _ in rows}):
        block = np.asarray([vals for c, vals in rows if c == ci])
        channels = {name: block[:, 1 + j].copy() for j, name in enumerate(names)}
        cycles.append(channels)
    return cycles
