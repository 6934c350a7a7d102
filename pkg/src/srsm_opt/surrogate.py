"""Hardy multiquadric radial-basis-function metamodels.

Each scalar response gets its own interpolant

    s(x) = sum_i w_i * sqrt(||x - x_i||^2 + c^2) + b,   sum_i w_i = 0

fitted on region-normalized points.  The constant ``b`` (with its side
condition) makes the interpolant reproduce constants exactly, so fitting
``a*y + b`` gives ``a*s + b`` everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve
from scipy.spatial import cKDTree

from . import kernels

__all__ = [
    "DuplicateCentersError",
    "RBFModel",
    "SingularSystemError",
    "default_shape",
    "fit_rbf",
    "fit_rbf_many",
    "loo_error",
    "predict",
    "predict_many",
]

COND_LIMIT = 1e12
RIDGE_FACTOR = 1e-10


class DuplicateCentersError(ValueError):
    pass


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class RBFModel:
    centers: np.ndarray
    weights: np.ndarray
    shape_c: float
    response_name: str = "y"
    bias: float = 0.0
    fit_stats: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.weights.shape[0] != self.centers.shape[0]:
            raise ValueError("one weight per center required")
        if not self.shape_c > 0:
            raise ValueError("shape parameter must be positive")

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def __call__(self, x):
        return predict(self, x)

    def to_dict(self) -> dict:
        return {
            "response": self.response_name,
            "shape_c": self.shape_c,
            "bias": self.bias,
            "centers": self.centers.tolist(),
            "weights": self.weights.tolist(),
            "fit_stats": dict(self.fit_stats),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RBFModel":
        return cls(
            centers=np.asarray(data["centers"], dtype=float),
            weights=np.asarray(data["weights"], dtype=float),
            shape_c=float(data["shape_c"]),
            response_name=data["response"],
            bias=float(data["bias"]),
            fit_stats=dict(data.get("fit_stats", {})),
        )


def _nn_distances(points: np.ndarray) -> np.ndarray:
    if points.shape[0] < 2:
        return np.empty(0)
    dist, _ = cKDTree(points).query(points, k=2)
    return dist[:, 1]


def default_shape(points) -> float:
    """Mean nearest-neighbour distance among the centers (1.0 for a single center)."""
    nn = _nn_distances(np.atleast_2d(np.asarray(points, dtype=float)))
    if nn.size == 0 or not np.mean(nn) > 0:
        return 1.0
    return float(np.mean(nn))


def _system(points: np.ndarray, c: float, ridge: float = 0.0) -> np.ndarray:
    n = points.shape[0]
    a = np.zeros((n + 1, n + 1))
    a[:n, :n] = kernels.mq_matrix(points, points, c)
    if ridge:
        a[np.arange(n), np.arange(n)] += ridge
    a[:n, n] = 1.0
    a[n, :n] = 1.0
    return a


def _factor(points: np.ndarray, c: float):
    """LU of the augmented system, with the ridge fallback for ill-conditioning."""
    n = points.shape[0]
    a = _system(points, c)
    lu = lu_factor(a, check_finite=False)
    rcond = _rcond(a, lu)
    ridge = 0.0
    if not rcond * COND_LIMIT > 1.0:
        ridge = RIDGE_FACTOR * float(np.trace(a[:n, :n])) / n
        a = _system(points, c, ridge)
        lu = lu_factor(a, check_finite=False)
        rcond = _rcond(a, lu)
        if not rcond > np.finfo(float).eps:
            raise SingularSystemError("multiquadric system singular even after ridge regularization")
    return lu, rcond, ridge


def _rcond(a: np.ndarray, lu) -> float:
    anorm = float(np.abs(a).sum(axis=0).max())
    rcond, info = lapack.dgecon(lu[0], anorm, norm="1")
    if info != 0:
        return 0.0
    return float(rcond)


def _prepare(points, shape_c):
    x = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
    if x.shape[0] < 1:
        raise ValueError("need at least one point")
    nn = _nn_distances(x)
    if nn.size and np.min(nn) == 0.0:
        raise DuplicateCentersError("duplicate RBF centers")
    c = float(shape_c) if shape_c is not None else default_shape(x)
    return x, c


def fit_rbf_many(points, responses, names: Sequence[str], shape_c: float | None = None, loo: bool = True) -> list[RBFModel]:
    """Fit one independent interpolant per column of ``responses`` on shared centers.

    The factorization is computed once and reused for every response.
    """
    x, c = _prepare(points, shape_c)
    y = np.asarray(responses, dtype=float).reshape(x.shape[0], -1)
    if y.shape[1] != len(names):
        raise ValueError("one name per response column required")
    n = x.shape[0]
    lu, rcond, ridge = _factor(x, c)
    rhs = np.zeros((n + 1, y.shape[1]))
    rhs[:n] = y
    sol = lu_solve(lu, rhs, check_finite=False)
    phi = kernels.mq_matrix(x, x, c)
    fitted = phi @ sol[:n] + sol[n]
    loo_rms = np.full(y.shape[1], np.nan)
    if loo and n >= 3:
        inv_diag = np.diag(lu_solve(lu, np.eye(n + 1), check_finite=False))[:n]
        loo_rms = np.sqrt(np.mean((sol[:n] / inv_diag[:, None]) ** 2, axis=0))
    centers = x.copy()
    centers.setflags(write=False)
    models = []
    for j, name in enumerate(names):
        stats = {
            "max_residual": float(np.max(np.abs(fitted[:, j] - y[:, j]))),
            "loo_rms": float(loo_rms[j]),
            "rcond": rcond,
            "ridge": ridge,
            "n_points": n,
        }
        models.append(RBFModel(centers, sol[:n, j].copy(), c, name, float(sol[n, j]), stats))
    return models


def fit_rbf(points, responses, shape_c: float | None = None, response_name: str = "y", loo: bool = True) -> RBFModel:
    """Fit a multiquadric interpolant to one scalar response."""
    y = np.asarray(responses, dtype=float).reshape(-1, 1)
    return fit_rbf_many(points, y, [response_name], shape_c=shape_c, loo=loo)[0]


def predict(model: RBFModel, x):
    """Interpolant value at one point ``(d,)`` or a batch ``(n, d)``."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    pts = np.ascontiguousarray(np.atleast_2d(arr))
    out = kernels.mq_matrix(pts, model.centers, model.shape_c) @ model.weights + model.bias
    return float(out[0]) if single else out


def predict_many(models: Sequence[RBFModel], x) -> np.ndarray:
    """``(n, len(models))`` predictions; the basis matrix is shared when centers match."""
    pts = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=float)))
    out = np.empty((pts.shape[0], len(models)))
    cache: dict[int, np.ndarray] = {}
    for j, m in enumerate(models):
        key = None
        for k, ref in cache.items():
            other = models[k]
            if other.shape_c == m.shape_c and (other.centers is m.centers or np.array_equal(other.centers, m.centers)):
                key = k
                break
        if key is None:
            cache[j] = kernels.mq_matrix(pts, m.centers, m.shape_c)
            key = j
        out[:, j] = cache[key] @ m.weights + m.bias
    return out


def loo_error(points, responses, shape_c: float | None = None) -> float:
    """Leave-one-out RMS error by explicit refitting.

    With ``shape_c=None`` the shape heuristic is re-applied to every reduced
    point set.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    y = np.asarray(responses, dtype=float).ravel()
    n = x.shape[0]
    if n < 3:
        raise ValueError("leave-one-out needs at least 3 points")
    _prepare(x, shape_c)
    err = np.empty(n)
    for i in range(n):
        keep = np.arange(n) != i
        model = fit_rbf(x[keep], y[keep], shape_c=shape_c, loo=False)
        err[i] = predict(model, x[i]) - y[i]
    return float(np.sqrt(np.mean(err ** 2)))
