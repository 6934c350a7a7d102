"""Analytic evaluators for testing the loop end to end."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from ..space import DesignPoint, DesignSpace, VariableSpec
from .base import Evaluator, ResponseSet

__all__ = ["FunctionEvaluator", "SphereEvaluator", "box_space"]


def box_space(lower, upper, name: str = "box", baseline=None) -> DesignSpace:
    """Continuous custom space ``x0..x{d-1}`` on the given box."""
    lo = np.atleast_1d(np.asarray(lower, dtype=float))
    hi = np.atleast_1d(np.asarray(upper, dtype=float))
    variables = tuple(VariableSpec(f"x{i}", lower=float(a), upper=float(b)) for i, (a, b) in enumerate(zip(lo, hi)))
    base = None if baseline is None else {f"x{i}": float(v) for i, v in enumerate(np.atleast_1d(baseline))}
    return DesignSpace(name=name, variables=variables, kind="custom", baseline=base)


class FunctionEvaluator(Evaluator):
    """Wraps ``fn(values) -> float | mapping`` of the sampled values."""

    name = "function"

    def __init__(self, fn: Callable[[np.ndarray], float | Mapping[str, float]], space: DesignSpace | None = None, response: str = "f"):
        super().__init__(space)
        self.fn = fn
        self.response = response

    def _evaluate(self, point: DesignPoint) -> ResponseSet:
        out = self.fn(np.asarray(point.values))
        if isinstance(out, ResponseSet):
            return out
        if isinstance(out, Mapping):
            return ResponseSet({k: float(v) for k, v in out.items()})
        return ResponseSet({self.response: float(out)})


class SphereEvaluator(Evaluator):
    """``f = sum((x - center)**2)``; the minimum 0 sits at ``center``."""

    name = "sphere"

    def __init__(self, space: DesignSpace, center=None, response: str = "f"):
        super().__init__(space)
        self.center = np.zeros(space.dim) if center is None else np.asarray(center, dtype=float)
        self.response = response

    def _evaluate(self, point: DesignPoint) -> ResponseSet:
        return ResponseSet({self.response: float(np.sum((point.values - self.center) ** 2))})
