"""Hybrid constrained minimizer: real-coded GA followed by projected gradient refinement.

Everything here works in the unit cube of the current region.  Functions
passed in are *batch* functions: ``f(U)`` maps an ``(n, d)`` array to ``(n,)``
objective values and ``g(U)`` to ``(n, m)`` non-negative scaled violations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .sampling import maximin_fill
from .space import DesignPoint, DesignSpace, Region, denormalize, normalize, resolve_dependents

__all__ = [
    "GAResult",
    "OptimizerConfig",
    "OptimumReport",
    "ga_minimize",
    "gradient_refine",
    "hybrid_optimize",
    "penalized",
]

BatchFn = Callable[[np.ndarray], np.ndarray]
FEASIBLE_TOL = 1e-9


@dataclass(frozen=True)
class OptimizerConfig:
    population: int = 100
    generations: int = 250
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # None -> 1/d
    mutation_sigma: float = 0.1
    blend_alpha: float = 0.5
    penalty_factor: float = 1e3
    penalty_milestones: tuple[int, ...] = (50, 100, 150, 200)
    refine_steps: int = 200
    refine_tol: float = 1e-6
    fd_step: float = 1e-4
    armijo_c: float = 1e-4
    init_pool_factor: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("population must be >= 4")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        object.__setattr__(self, "penalty_milestones", tuple(int(m) for m in self.penalty_milestones))


def penalized(fvals, violations, penalty_factor: float = 1e3):
    """``f + penalty * sum(v**2)``; ``violations`` is ``(n, m)`` or ``(m,)``."""
    f = np.asarray(fvals, dtype=float)
    v = np.asarray(violations, dtype=float)
    if v.size == 0:
        return f
    return f + penalty_factor * np.sum(v * v, axis=-1)


def _evaluate(f: BatchFn, g: BatchFn | None, u: np.ndarray):
    fv = np.asarray(f(u), dtype=float).reshape(u.shape[0])
    if g is None:
        gv = np.zeros((u.shape[0], 0))
    else:
        gv = np.asarray(g(u), dtype=float).reshape(u.shape[0], -1)
    # non-finite predictions rank last
    fv = np.where(np.isfinite(fv), fv, np.inf)
    return fv, gv


@dataclass
class GAResult:
    x: np.ndarray
    value: float
    objective: float
    violations: np.ndarray
    penalty_factor: float
    history: list = field(default_factory=list)
    penalty_history: list = field(default_factory=list)


def _snap(u: np.ndarray, discrete: dict[int, np.ndarray]) -> np.ndarray:
    for i, levels in discrete.items():
        u[:, i] = levels[np.abs(u[:, i, None] - levels[None, :]).argmin(axis=1)]
    return u


def ga_minimize(
    f: BatchFn,
    g: BatchFn | None,
    dim: int,
    config: OptimizerConfig = OptimizerConfig(),
    discrete: dict[int, Sequence[float]] | None = None,
    seed: int | None = None,
) -> GAResult:
    """Real-coded GA on ``[0, 1]^dim``.

    Tournament selection of size 2, blend crossover, per-gene Gaussian
    mutation, one elite.  ``discrete`` maps gene index to its allowed
    normalized levels; those genes are inherited from a random parent and
    mutate uniformly over the levels.
    """
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    disc = {int(i): np.asarray(v, dtype=float) for i, v in (discrete or {}).items()}
    cont = np.array([i not in disc for i in range(dim)])
    rate = config.mutation_rate if config.mutation_rate is not None else 1.0 / dim
    npop = config.population

    unit = Region(np.full(dim, 0.5), np.full(dim, 0.5))
    plan = maximin_fill(unit, npop, None, seed=int(rng.integers(2**62)), pool_factor=config.init_pool_factor)
    pop = _snap(plan.values().copy(), disc)
    factor = config.penalty_factor
    fv, gv = _evaluate(f, g, pop)
    pen = penalized(fv, gv, factor)
    history, pen_hist = [], []
    for gen in range(1, config.generations + 1):
        best = int(np.argmin(pen))
        if gen in config.penalty_milestones and gv.shape[1] and np.max(gv[best]) > FEASIBLE_TOL:
            factor *= 2.0
            pen = penalized(fv, gv, factor)
            best = int(np.argmin(pen))
        history.append(float(pen[best]))
        pen_hist.append(factor)

        # tournament selection (size 2, ties to the lower index)
        a = rng.integers(npop, size=npop)
        b = rng.integers(npop, size=npop)
        winners = np.where((pen[a] < pen[b]) | ((pen[a] == pen[b]) & (a <= b)), a, b)
        parents = pop[winners]
        p1, p2 = parents[0::2], parents[1::2]
        m = min(len(p1), len(p2))
        p1, p2 = p1[:m], p2[:m]
        cross = rng.random(m) < config.crossover_rate
        lo = np.minimum(p1, p2)
        hi = np.maximum(p1, p2)
        span = hi - lo
        r1 = rng.random(p1.shape)
        r2 = rng.random(p1.shape)
        c1 = lo - config.blend_alpha * span + r1 * (1 + 2 * config.blend_alpha) * span
        c2 = lo - config.blend_alpha * span + r2 * (1 + 2 * config.blend_alpha) * span
        pick = rng.random(p1.shape) < 0.5
        c1[:, ~cont] = np.where(pick, p1, p2)[:, ~cont]
        c2[:, ~cont] = np.where(pick, p2, p1)[:, ~cont]
        c1 = np.where(cross[:, None], c1, p1)
        c2 = np.where(cross[:, None], c2, p2)
        kids = np.concatenate([c1, c2], axis=0)
        if kids.shape[0] < npop - 1:
            kids = np.concatenate([kids, parents[: npop - 1 - kids.shape[0]]], axis=0)
        kids = kids[: npop - 1]

        mut = rng.random(kids.shape) < rate
        noise = rng.normal(0.0, config.mutation_sigma, kids.shape)
        kids = np.where(mut & cont[None, :], kids + noise, kids)
        for i, levels in disc.items():
            redraw = mut[:, i]
            kids[redraw, i] = levels[rng.integers(levels.size, size=int(redraw.sum()))]
        kids = np.clip(kids, 0.0, 1.0)
        kids = _snap(kids, disc)

        kf, kg = _evaluate(f, g, kids)
        pop = np.concatenate([pop[best:best + 1], kids], axis=0)
        fv = np.concatenate([fv[best:best + 1], kf])
        gv = np.concatenate([gv[best:best + 1], kg], axis=0)
        pen = penalized(fv, gv, factor)

    best = int(np.argmin(pen))
    history.append(float(pen[best]))
    pen_hist.append(factor)
    return GAResult(pop[best].copy(), float(pen[best]), float(fv[best]), gv[best].copy(), factor, history, pen_hist)


def gradient_refine(
    f: BatchFn,
    g: BatchFn | None,
    start,
    config: OptimizerConfig = OptimizerConfig(),
    penalty_factor: float | None = None,
    free: np.ndarray | None = None,
):
    """Projected gradient descent on the penalized objective inside ``[0, 1]^d``.

    Central differences (one-sided at the box faces), Armijo backtracking by
    halving.  Coordinates with ``free=False`` are held fixed.  Returns
    ``(x, penalized_value, steps)``; the value never exceeds the start's.
    """
    factor = config.penalty_factor if penalty_factor is None else penalty_factor
    x = np.clip(np.asarray(start, dtype=float).copy(), 0.0, 1.0)
    d = x.size
    free = np.ones(d, dtype=bool) if free is None else np.asarray(free, dtype=bool)
    idx = np.flatnonzero(free)

    def pen_of(u):
        fv, gv = _evaluate(f, g, u)
        return penalized(fv, gv, factor)

    fx = float(pen_of(x[None, :])[0])
    if idx.size == 0 or not np.isfinite(fx):
        return x, fx, 0
    h = config.fd_step
    t = 1.0
    steps = 0
    for steps in range(1, config.refine_steps + 1):
        plus = np.repeat(x[None, :], idx.size, axis=0)
        minus = plus.copy()
        rows = np.arange(idx.size)
        plus[rows, idx] = np.minimum(x[idx] + h, 1.0)
        minus[rows, idx] = np.maximum(x[idx] - h, 0.0)
        vals = pen_of(np.concatenate([plus, minus], axis=0))
        spacing = plus[rows, idx] - minus[rows, idx]
        grad = np.zeros(d)
        grad[idx] = (vals[: idx.size] - vals[idx.size:]) / spacing
        if not np.all(np.isfinite(grad)):
            break
        pg = np.clip(x - grad, 0.0, 1.0) - x
        if np.linalg.norm(pg) < config.refine_tol:
            break
        t = min(1.0, 2.0 * t)
        accepted = False
        while t > 1e-12:
            trial = np.clip(x - t * grad, 0.0, 1.0)
            trial[~free] = x[~free]
            ft = float(pen_of(trial[None, :])[0])
            if ft <= fx + config.armijo_c * float(grad @ (trial - x)) and ft <= fx:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        step_len = np.linalg.norm(trial - x)
        x, fx = trial, ft
        if step_len < 1e-15:
            break
    return x, fx, steps


@dataclass
class OptimumReport:
    point: DesignPoint
    x_normalized: np.ndarray
    predicted_objective: float
    penalized_objective: float
    scaled_violations: np.ndarray
    feasible: bool
    ga_best: float
    refined_gain: float
    penalty_factor: float
    ga_history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "values": self.point.values.tolist(),
            "x_normalized": self.x_normalized.tolist(),
            "predicted_objective": self.predicted_objective,
            "penalized_objective": self.penalized_objective,
            "scaled_violations": self.scaled_violations.tolist(),
            "feasible": self.feasible,
            "ga_best": self.ga_best,
            "refined_gain": self.refined_gain,
            "penalty_factor": self.penalty_factor,
        }


def hybrid_optimize(
    objective: BatchFn,
    constraints: BatchFn | None,
    region: Region,
    config: OptimizerConfig = OptimizerConfig(),
    space: DesignSpace | None = None,
    seed: int | None = None,
    iteration: int = 0,
) -> OptimumReport:
    """GA then gradient refinement of functions of *raw* design values over ``region``.

    ``objective(X)`` and ``constraints(X)`` receive ``(n, d)`` design values
    (discrete variables already on their levels).
    """
    dim = region.dim
    discrete = {}
    if space is not None:
        for i, spec in enumerate(space.sampled):
            if spec.is_discrete:
                discrete[i] = normalize(np.asarray(spec.levels), Region(region.center[i:i + 1], region.half_range[i:i + 1]))

    def to_x(u):
        return denormalize(u, region, space)

    f_u = lambda u: objective(to_x(u))  # noqa: E731
    g_u = None if constraints is None else (lambda u: constraints(to_x(u)))  # noqa: E731

    ga = ga_minimize(f_u, g_u, dim, config, discrete=discrete, seed=seed)
    free = np.array([i not in discrete for i in range(dim)])
    x, pen_val, _ = gradient_refine(f_u, g_u, ga.x, config, penalty_factor=ga.penalty_factor, free=free)
    if pen_val > ga.value:
        x, pen_val = ga.x, ga.value
    fv, gv = _evaluate(f_u, g_u, x[None, :])
    values = to_x(x[None, :])[0]
    if space is not None:
        point = resolve_dependents(values, space, iteration=iteration)
    else:
        point = DesignPoint(values, {f"x{i}": float(v) for i, v in enumerate(values)}, iteration=iteration)
    viol = gv[0]
    return OptimumReport(
        point=point,
        x_normalized=x,
        predicted_objective=float(fv[0]),
        penalized_objective=float(pen_val),
        scaled_violations=viol,
        feasible=bool(viol.size == 0 or np.max(viol) <= FEASIBLE_TOL),
        ga_best=ga.value,
        refined_gain=float(ga.value - pen_val),
        penalty_factor=ga.penalty_factor,
        ga_history=ga.history,
    )
