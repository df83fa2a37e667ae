"""Non-negative matrix factorization of muscle activations into synergies.

An activation matrix M (T x m) is factorized as M ~ W H with W (T x k)
temporal coefficients and H (k x m) spatial weights, both entrywise
non-negative. H is the fixed basis the controller multiplies its k synergy
activations by to recover per-muscle excitations.

Solver: multiplicative updates for the squared Frobenius objective. Each
half-update is non-increasing in the objective, which the fit verifies and
tests assert. After fitting, H rows are rescaled to unit peak weight (the
scale folded into W) so synergy activations are comparable across synergies;
the applied scales are stored and the transform is reversible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, NumericalError

_DENOM_FLOOR = 1e-12

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 5000


@dataclass
class ActivationMatrix:
    """T x m non-negative activation samples with muscle labels."""

    data: np.ndarray
    muscle_names: list

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2:
            raise ValueError("activation matrix must be 2-d (T x m)")
        if np.any(self.data < 0):
            raise ValueError("activation matrix has negative entries")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("activation matrix has non-finite entries")
        if len(self.muscle_names) != self.data.shape[1]:
            raise ValueError(
                f"{len(self.muscle_names)} muscle names for {self.data.shape[1]} columns"
            )

    @property
    def n_samples(self):
        return self.data.shape[0]

    @property
    def n_muscles(self):
        return self.data.shape[1]


@dataclass
class SynergyBasis:
    """The factor pair from NMF. H rows are the controller's expansion basis."""

    W: np.ndarray
    H: np.ndarray
    k: int
    muscle_names: list
    converged: bool = False
    final_residual: float = math.nan
    row_scales: np.ndarray | None = None       # peak weights folded into W
    objective_history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.H = np.asarray(self.H, dtype=float)
        if self.H.shape[0] != self.k:
            raise ValueError(f"H has {self.H.shape[0]} rows, declared k={self.k}")
        if self.W.shape[1] != self.k:
            raise ValueError(f"W has {self.W.shape[1]} columns, declared k={self.k}")
        if np.any(self.W < 0) or np.any(self.H < 0):
            raise ValueError("synergy factors must be non-negative")
        if np.any(self.H.max(axis=1) <= 0):
            raise ValueError("every H row needs at least one positive weight")

    @property
    def n_muscles(self):
        return self.H.shape[1]


def nmf(M: ActivationMatrix, k: int, seed: int = 0,
        max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL) -> SynergyBasis:
    """Factorize M into k synergies by multiplicative updates.

    Deterministic for a fixed seed. Initial factors are absolute Gaussian
    draws scaled by sqrt(mean(M)/k). Iteration stops when the relative
    decrease of ||M - WH||_F^2 falls below tol, or at max_iter.
    """
    T, m = M.data.shape
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > min(T, m):
        raise ValueError(f"k={k} exceeds min(T={T}, m={m})")

    X = M.data
    rng = np.random.default_rng(seed)
    scale = math.sqrt(max(X.mean(), _DENOM_FLOOR) / k)
    W = np.abs(rng.standard_normal((T, k))) * scale
    H = np.abs(rng.standard_normal((k, m))) * scale

    def objective():
        return float(np.linalg.norm(X - W @ H) ** 2)

    history = [objective()]
    converged = False
    for _ in range(max_iter):
        H *= (W.T @ X) / np.maximum(W.T @ W @ H, _DENOM_FLOOR)
        W *= (X @ H.T) / np.maximum(W @ (H @ H.T), _DENOM_FLOOR)
        obj = objective()
        history.append(obj)
        prev = history[-2]
        if prev - obj < tol * max(prev, _DENOM_FLOOR):
            converged = True
            break

    peaks = H.max(axis=1)
    if np.any(peaks < _DENOM_FLOOR):
        dead = int(np.argmin(peaks))
        raise NumericalError(
            f"synergy {dead} collapsed to zero weights; reduce k or change the seed"
        )
    W = W * peaks
    H = H / peaks[:, None]

    return SynergyBasis(W=W, H=H, k=k, muscle_names=list(M.muscle_names),
                        converged=converged,
                        final_residual=float(np.linalg.norm(X - W @ H)),
                        row_scales=peaks, objective_history=history)


def vaf(M: ActivationMatrix, M_hat: ActivationMatrix | np.ndarray) -> float:
    """Variance accounted for: 1 - ||M - M_hat||_F^2 / ||M||_F^2."""
    X = M.data
    Y = M_hat.data if isinstance(M_hat, ActivationMatrix) else np.asarray(M_hat, dtype=float)
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Y.shape}")
    denom = float(np.linalg.norm(X) ** 2)
    if denom == 0.0:
        raise ValueError("VAF undefined for an all-zero reference matrix")
    return 1.0 - float(np.linalg.norm(X - Y) ** 2) / denom


def expand_synergy(s, basis: SynergyBasis) -> np.ndarray:
    """Muscle excitations from synergy activations: clamp(s . H, 0, 1).

    Products above 1 are clipped before entering muscle dynamics.
    """
    s = np.asarray(s, dtype=float)
    if s.shape != (basis.k,):
        raise ValueError(f"expected {basis.k} synergy activations, got shape {s.shape}")
    return np.clip(s @ basis.H, 0.0, 1.0)


def save_basis(basis: SynergyBasis, path):
    """Write a basis as JSON (full float precision, row-major H)."""
    payload = {
        "format": "synloco-basis",
        "version": 1,
        "k": basis.k,
        "muscle_names": list(basis.muscle_names),
        "H": [[float(x) for x in row] for row in basis.H],
        "W": [[float(x) for x in row] for row in basis.W],
        "converged": bool(basis.converged),
        "final_residual": float(basis.final_residual),
        "normalization": {
            "mode": "unit_max_rows",
            "row_scales": None if basis.row_scales is None
            else [float(x) for x in basis.row_scales],
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def load_basis(path) -> SynergyBasis:
    path = Path(path)
    if not path.exists():
        raise DataError(f"basis file not found: {path}")
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"basis file {path} is not valid JSON: {exc}") from exc
    if payload.get("format") != "synloco-basis":
        raise DataError(f"{path}: not a synergy basis file")
    H = np.asarray(payload["H"], dtype=float)
    W = np.asarray(payload.get("W", np.zeros((0, payload["k"]))), dtype=float)
    if np.any(H < 0) or np.any(W < 0):
        raise DataError(f"{path}: negative synergy weight")
    if H.shape[0] != payload["k"]:
        raise DataError(f"{path}: H has {H.shape[0]} rows but declares k={payload['k']}")
    if len(payload["muscle_names"]) != H.shape[1]:
        raise DataError(f"{path}: muscle name count does not match H columns")
    scales = payload.get("normalization", {}).get("row_scales")
    return SynergyBasis(
        W=W, H=H, k=int(payload["k"]), muscle_names=list(payload["muscle_names"]),
        converged=bool(payload.get("converged", False)),
        final_residual=float(payload.get("final_residual", math.nan)),
        row_scales=None if scales is None else np.asarray(scales, dtype=float),
    )


def project_basis(basis: SynergyBasis, muscle_map: dict, target_names,
                  renormalize: bool = False) -> SynergyBasis:
    """Aggregate H columns onto a coarser muscle set.

    muscle_map sends each target muscle to the list of source muscle names it
    lumps together; H columns in a group are averaged. Source muscles missing
    from the basis are an error, source muscles not named by any group are
    dropped. By default the group means are kept as-is, preserving the
    excitation scale of the source basis (re-inflating rows to unit peak
    concentrates weight and saturates the clamp at mid-range activations);
    renormalize=True restores unit-peak rows.
    """
    index = {name: j for j, name in enumerate(basis.muscle_names)}
    columns = []
    for target in target_names:
        members = muscle_map.get(target)
        if not members:
            raise DataError(f"muscle_map has no source muscles for {target!r}")
        missing = [m for m in members if m not in index]
        if missing:
            raise DataError(f"basis lacks source muscles {missing} for {target!r}")
        columns.append(basis.H[:, [index[m] for m in members]].mean(axis=1))
    H = np.column_stack(columns)
    peaks = H.max(axis=1)
    if np.any(peaks < _DENOM_FLOOR):
        raise NumericalError("a synergy has no weight on the target muscle set")
    if renormalize:
        return SynergyBasis(W=basis.W * peaks, H=H / peaks[:, None], k=basis.k,
                            muscle_names=list(target_names),
                            converged=basis.converged,
                            final_residual=basis.final_residual,
                            row_scales=peaks)
    return SynergyBasis(W=basis.W.copy(), H=H, k=basis.k,
                        muscle_names=list(target_names),
                        converged=basis.converged,
                        final_residual=basis.final_residual,
                        row_scales=None)
