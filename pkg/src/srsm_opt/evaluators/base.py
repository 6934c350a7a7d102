"""Evaluation contract shared by every evaluator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..problem import Curve
from ..space import DesignPoint, DesignSpace, resolve_dependents

__all__ = ["Evaluator", "ResponseSet"]


@dataclass(frozen=True)
class ResponseSet:
    scalars: Mapping[str, float] = field(default_factory=dict)
    curves: Mapping[str, Curve] = field(default_factory=dict)
    settling_end: float = 0.0
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def reason(self) -> str | None:
        if self.ok:
            return None
        return self.status[len("failed("):-1] if self.status.startswith("failed(") else self.status

    @classmethod
    def failed(cls, reason: str) -> "ResponseSet":
        return cls(status=f"failed({reason})")

    def with_scalars(self, extra: Mapping[str, float]) -> "ResponseSet":
        merged = dict(self.scalars)
        merged.update(extra)
        return ResponseSet(merged, self.curves, self.settling_end, self.status)

    def to_dict(self) -> dict:
        return {"status": self.status, "settling_end": self.settling_end, "scalars": {k: float(v) for k, v in self.scalars.items()}}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ResponseSet":
        return cls(dict(data.get("scalars", {})), {}, float(data.get("settling_end", 0.0)), data["status"])


class Evaluator:
    """Base class: bounds check, exception capture and finiteness check.

    Subclasses implement ``_evaluate(point) -> ResponseSet``.  ``evaluate``
    never raises; every problem becomes a failed ResponseSet.
    """

    name = "base"

    def __init__(self, space: DesignSpace | None = None):
        self.space = space

    def _as_point(self, point) -> DesignPoint:
        if isinstance(point, DesignPoint):
            return point
        if self.space is None:
            v = np.asarray(point, dtype=float)
            return DesignPoint(v, {f"x{i}": float(x) for i, x in enumerate(v)})
        return resolve_dependents(point, self.space)

    def evaluate(self, point) -> ResponseSet:
        try:
            pt = self._as_point(point)
        except Exception as exc:  # noqa: BLE001
            return ResponseSet.failed(f"bad_point: {exc}")
        if self.space is not None and not self.space.in_bounds(pt.values):
            return ResponseSet.failed("out_of_bounds")
        try:
            rs = self._evaluate(pt)
        except Exception as exc:  # noqa: BLE001 - failures are data
            return ResponseSet.failed(f"{type(exc).__name__}: {exc}")
        if rs.ok and not all(math.isfinite(float(v)) for v in rs.scalars.values()):
            return ResponseSet.failed("non_finite_response")
        return rs

    def _evaluate(self, point: DesignPoint) -> ResponseSet:  # pragma: no cover
        raise NotImplementedError
