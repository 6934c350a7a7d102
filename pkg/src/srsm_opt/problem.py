"""Objectives, constraints and DOE weight calibration."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "CalibrationError",
    "ConstraintSpec",
    "Curve",
    "MissingResponseError",
    "ObjectiveSpec",
    "calibrate_weights_doe",
    "curve_mse",
    "evaluate_constraints",
    "load_curves_csv",
    "objective_eq1",
    "objective_eq2",
    "save_curves_csv",
    "weighted_objective",
]

MSE_FLOOR = 1e-12


class MissingResponseError(KeyError):
    pass


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Curve:
    """Uniformly sampled response history starting at t = 0."""

    values: np.ndarray
    dt: float = 0.010
    quantity: str = ""
    units: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(v)):
            raise ValueError("curve values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.dt

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, Curve):
            return NotImplemented
        return (self.dt, self.quantity, self.units) == (other.dt, other.quantity, other.units) and np.array_equal(self.values, other.values)

    __hash__ = None

    def after(self, t0: float) -> "Curve":
        """Samples at or after ``t0`` (used to drop the settling phase)."""
        start = int(np.ceil(t0 / self.dt - 1e-9))
        return Curve(self.values[start:], self.dt, self.quantity, self.units)


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str
    response: str
    weight: float = 1.0
    absolute: bool = True
    target: Curve | None = None
    normalization: float | None = None

    def __post_init__(self):
        if self.kind not in ("weighted_scalar", "curve_mse"):
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ValueError("objective weights must be finite and non-negative")
        if self.kind == "curve_mse":
            if self.target is None:
                raise ValueError("curve_mse objectives need a target curve")
            if self.normalization is None:
                norm = max(float(np.mean(self.target.values ** 2)), MSE_FLOOR)
                object.__setattr__(self, "normalization", norm)
            if not self.normalization > 0:
                raise ValueError("normalization must be positive")

    @property
    def scalar_name(self) -> str:
        """Name of the scalar response this term reads after curve reduction."""
        return "mse_" + self.response if self.kind == "curve_mse" else self.response


@dataclass(frozen=True)
class ConstraintSpec:
    response: str
    bound: float
    direction: str = "<="
    scale: float | None = None

    def __post_init__(self):
        if self.direction not in ("<=", ">="):
            raise ValueError(f"constraint direction must be '<=' or '>=', got {self.direction!r}")
        if self.scale is None:
            object.__setattr__(self, "scale", abs(self.bound) if self.bound != 0 else 1.0)
        if not self.scale > 0:
            raise ValueError("constraint scale must be positive")

    def violation(self, value):
        v = np.asarray(value, dtype=float)
        if self.direction == "<=":
            return np.maximum(0.0, (v - self.bound) / self.scale)
        return np.maximum(0.0, (self.bound - v) / self.scale)


def _get(responses: Mapping, name: str):
    try:
        return responses[name]
    except KeyError:
        raise MissingResponseError(name) from None


def objective_eq1(responses: Mapping, w1: float = 1.0, w2: float = 1.0):
    """Weighted absolute subsidence plus expulsion displacement."""
    return w1 * np.abs(_get(responses, "d_subsidence")) + w2 * np.abs(_get(responses, "d_expulsion"))


def curve_mse(candidate: Curve, target: Curve, normalization: float | None = None) -> float:
    """Mean square difference normalized by the target's mean square.

    A candidate of different length is linearly resampled onto the target's
    time stamps.
    """
    if len(candidate) == 0 or len(target) == 0:
        raise ValueError("empty curve")
    if candidate.quantity and target.quantity and candidate.quantity != target.quantity:
        raise ValueError(f"quantity mismatch: {candidate.quantity} vs {target.quantity}")
    c = candidate.values
    if len(candidate) != len(target) or candidate.dt != target.dt:
        c = np.interp(target.times, candidate.times, candidate.values)
    err = float(np.mean((c - target.values) ** 2))
    norm = normalization if normalization is not None else max(float(np.mean(target.values ** 2)), MSE_FLOOR)
    return err / norm


def objective_eq2(mse_values: Sequence[float], weights: Sequence[float] | None = None, expected: int | None = 16) -> float:
    """Weighted sum of per-curve normalized errors."""
    mse = np.asarray(mse_values, dtype=float)
    if expected is not None and mse.size != expected:
        raise ValueError(f"expected {expected} curve errors, got {mse.size}")
    w = np.ones_like(mse) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != mse.shape:
        raise ValueError("one weight per curve error required")
    return float(np.dot(w, mse))


def weighted_objective(scalars: Mapping, objectives: Sequence[ObjectiveSpec]):
    """Generic weighted sum over objective terms (scalars may be arrays)."""
    total = 0.0
    for spec in objectives:
        v = _get(scalars, spec.scalar_name)
        total = total + spec.weight * (np.abs(v) if (spec.kind == "weighted_scalar" and spec.absolute) else v)
    return total


def evaluate_constraints(responses: Mapping, specs: Sequence[ConstraintSpec]) -> list:
    """Scaled violations, one per constraint (0 when satisfied)."""
    return [spec.violation(_get(responses, spec.response)) for spec in specs]


def reduce_curves(curves: Mapping[str, Curve], objectives: Sequence[ObjectiveSpec], settling_end: float = 0.0) -> dict:
    """Per-objective ``mse_<curve>`` scalars, settling phase excluded."""
    out = {}
    for spec in objectives:
        if spec.kind != "curve_mse":
            continue
        cand = _get(curves, spec.response)
        cand = cand.after(settling_end) if settling_end > 0 else cand
        target = spec.target.after(settling_end) if settling_end > 0 else spec.target
        out[spec.scalar_name] = curve_mse(cand, target, spec.normalization)
    return out


def calibrate_weights_doe(evaluator, space, n: int = 100, seed: int = 0, pool_factor: int = 100):
    """Scale factor between the two displacement objectives from a maximin DOE.

    Returns ``(w1, w2, report)`` with ``w1 = 1`` and
    ``w2 = mean|d_subsidence| / mean|d_expulsion|`` over the successful designs.
    """
    from .sampling import maximin_fill
    from .space import Region

    plan = maximin_fill(Region.full(space), n, space, seed=seed, pool_factor=pool_factor)
    sub, exp = [], []
    failed = 0
    for point in plan.points:
        rs = evaluator.evaluate(point)
        if not rs.ok:
            failed += 1
            continue
        sub.append(abs(rs.scalars["d_subsidence"]))
        exp.append(abs(rs.scalars["d_expulsion"]))
    if not sub:
        raise CalibrationError("every DOE evaluation failed")
    mean_sub = float(np.mean(sub))
    mean_exp = float(np.mean(exp))
    if mean_exp == 0.0:
        raise CalibrationError("mean |d_expulsion| is zero; weights undefined")
    w2 = mean_sub / mean_exp
    report = {
        "n_designs": n,
        "n_failed": failed,
        "mean_abs_d_subsidence": mean_sub,
        "mean_abs_d_expulsion": mean_exp,
        "w1": 1.0,
        "w2": w2,
        "points": [p.values.tolist() for p in plan.points],
    }
    return 1.0, w2, report


def save_curves_csv(path, curves: Mapping[str, Curve]) -> None:
    """Write curves sharing one time grid as ``time,<name>...`` columns."""
    names = list(curves)
    first = curves[names[0]]
    for nm in names:
        if len(curves[nm]) != len(first) or curves[nm].dt != first.dt:
            raise ValueError("all curves in one CSV must share a time grid")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time"] + names)
        for i, t in enumerate(first.times):
            w.writerow([repr(float(t))] + [repr(float(curves[nm].values[i])) for nm in names])


def load_curves_csv(path) -> dict[str, Curve]:
    """Read ``time,<quantity>...`` columns (time in seconds, uniform steps)."""
    with open(Path(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: no data rows")
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    t = data[:, 0]
    dt = float(t[1] - t[0]) if t.size > 1 else 0.010
    if t.size > 2 and not np.allclose(np.diff(t), dt, rtol=1e-6, atol=1e-12):
        raise ValueError(f"{path}: time column is not uniformly spaced")
    return {name: Curve(data[:, j + 1], dt=round(dt, 12), quantity=name) for j, name in enumerate(header[1:])}
