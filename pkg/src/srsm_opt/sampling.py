"""Space-filling point selection.

Candidates are drawn uniformly (with rejection against the sampling
constraints) and then picked greedily: each pick maximizes its minimum
distance, in region-normalized coordinates, to the prior points inside the
region and to everything already picked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .space import DesignPoint, DesignSpace, Region, normalize, resolve_dependents, sampling_feasible

__all__ = ["InfeasibleSpaceError", "SamplePlan", "derive_seed", "draw_uniform", "greedy_select", "maximin_fill"]

STREAMS = {"sampling": 1, "ga": 2, "sobol": 3, "doe": 4, "refine": 5}


class InfeasibleSpaceError(RuntimeError):
    """No feasible candidate could be drawn within the rejection budget."""

    def __init__(self, message: str, dominant: str | None = None):
        super().__init__(message)
        self.dominant = dominant


def derive_seed(master: int, *keys) -> int:
    """Integer seed of a named substream, e.g. ``derive_seed(7, 3, "ga")``."""
    key = tuple(STREAMS[k] if isinstance(k, str) else int(k) for k in keys)
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class SamplePlan:
    points: tuple[DesignPoint, ...]
    prior_points_used: tuple[int, ...]
    seed: int
    pool: np.ndarray = field(repr=False, default=None)
    selected: np.ndarray = field(repr=False, default=None)
    min_distances: np.ndarray = field(repr=False, default=None)

    def values(self) -> np.ndarray:
        if not self.points:
            return np.empty((0, 0))
        return np.stack([p.values for p in self.points])


def draw_uniform(rng: np.random.Generator, region: Region, space: DesignSpace | None, count: int) -> np.ndarray:
    """``count`` uniform draws in ``region``; discrete variables uniform over their levels."""
    u = rng.random((count, region.dim))
    x = region.lower + u * (2.0 * region.half_range)
    if space is not None:
        for i, spec in enumerate(space.sampled):
            if spec.is_discrete:
                levels = np.asarray(spec.levels)
                inside = levels[(levels >= region.lower[i] - 1e-12) & (levels <= region.upper[i] + 1e-12)]
                if inside.size == 0:
                    inside = levels[[np.abs(levels - region.center[i]).argmin()]]
                x[:, i] = inside[np.minimum((u[:, i] * inside.size).astype(int), inside.size - 1)]
    return x


def greedy_select(pool_u: np.ndarray, prior_u: np.ndarray | None, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Greedy maximin picks from a normalized candidate pool.

    Returns the picked pool indices and, for each pick, its minimum distance
    to the sites occupied before it (``inf`` for the very first pick when no
    prior exists; that pick is the candidate farthest from the cube centre).
    """
    pool_u = np.ascontiguousarray(pool_u, dtype=float)
    d = pool_u.shape[1]
    prior = np.zeros((0, d)) if prior_u is None else np.ascontiguousarray(np.reshape(prior_u, (-1, d)), dtype=float)
    if n > pool_u.shape[0]:
        raise ValueError(f"cannot pick {n} points from a pool of {pool_u.shape[0]}")
    ref = np.full(d, 0.5)
    return kernels.greedy_maximin(pool_u, prior, int(n), ref)


def maximin_fill(
    region: Region,
    n: int,
    space: DesignSpace | None = None,
    prior: Sequence[DesignPoint] = (),
    seed: int = 0,
    pool_factor: int = 100,
    max_rejects: int = 10**6,
    constraint: Callable[[np.ndarray], np.ndarray] | None = None,
    pool: np.ndarray | None = None,
    first_id: int = 0,
    iteration: int = 0,
    use_space_constraints: bool = True,
) -> SamplePlan:
    """Select ``n`` feasible, well-spread points in ``region``.

    ``constraint`` is an extra vectorized predicate on raw design values
    returning a boolean mask.  Passing ``pool`` (raw values) skips the
    random draw, which is mainly useful for testing the greedy rule.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if space is not None and space.dim != region.dim:
        raise ValueError("region and design space dimensions differ")

    def feasible(x):
        mask = np.ones(x.shape[0], dtype=bool)
        counts = {}
        if space is not None and use_space_constraints:
            m, names, c = sampling_feasible(x, space)
            mask &= m
            counts.update({nm: int(cnt) for nm, cnt in zip(names, c)})
        if constraint is not None:
            extra = np.asarray(constraint(x), dtype=bool)
            counts["user_constraint"] = counts.get("user_constraint", 0) + int((~extra).sum())
            mask &= extra
        return mask, counts

    if pool is None:
        rng = np.random.default_rng(seed)
        need = int(pool_factor) * n
        accepted = []
        have = 0
        streak = 0
        totals: dict[str, int] = {}
        batch = max(256, 2 * need)
        while have < need:
            x = draw_uniform(rng, region, space, batch)
            mask, counts = feasible(x)
            for k, v in counts.items():
                totals[k] = totals.get(k, 0) + v
            hits = np.flatnonzero(mask)
            if hits.size == 0:
                streak += batch
            else:
                streak = batch - 1 - hits[-1]
                accepted.append(x[hits[: need - have]])
                have += min(hits.size, need - have)
            if streak >= max_rejects and have < need:
                dominant = max(totals, key=totals.get) if totals else None
                raise InfeasibleSpaceError(
                    f"no feasible candidate in {streak} consecutive draws; "
                    f"most violated sampling constraint: {dominant}",
                    dominant,
                )
        pool = np.concatenate(accepted, axis=0)
    else:
        pool = np.atleast_2d(np.asarray(pool, dtype=float))
        mask, _ = feasible(pool)
        pool = pool[mask]
        if pool.shape[0] < n:
            raise InfeasibleSpaceError("supplied pool has fewer feasible candidates than requested")

    used = [p for p in prior if bool(region.contains(p.values)[0])]
    prior_u = normalize(np.stack([p.values for p in used]), region) if used else None
    pool_u = normalize(pool, region)
    idx, score = greedy_select(pool_u, prior_u, n)
    if np.any(score <= 0.0):
        raise InfeasibleSpaceError("candidate pool too small to avoid duplicate points")

    points = []
    for j, i in enumerate(idx):
        vals = pool[i]
        if space is not None:
            points.append(resolve_dependents(vals, space, id=first_id + j, iteration=iteration))
        else:
            points.append(DesignPoint(vals, {f"x{k}": float(v) for k, v in enumerate(vals)}, first_id + j, iteration))
    return SamplePlan(
        points=tuple(points),
        prior_points_used=tuple(p.id for p in used),
        seed=int(seed),
        pool=pool,
        selected=np.asarray(idx),
        min_distances=np.asarray(score),
    )
