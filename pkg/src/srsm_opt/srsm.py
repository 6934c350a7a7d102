"""Sequential response-surface loop with domain reduction.

Each iteration samples the current region, evaluates the new designs, fits
one multiquadric model per required response, optimizes the models, checks
the predicted optimum with one true evaluation, tests the termination
criteria and finally moves/shrinks the region around the optimum.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .optimizer import FEASIBLE_TOL, OptimizerConfig, hybrid_optimize
from .problem import ConstraintSpec, ObjectiveSpec, evaluate_constraints, reduce_curves, weighted_objective
from .sampling import derive_seed, maximin_fill
from .space import DesignPoint, DesignSpace, Region, normalize, resolve_dependents, sampling_violations
from .surrogate import fit_rbf_many, predict_many

__all__ = [
    "DEFAULT_SAMPLES",
    "DomainConfig",
    "EvalRecord",
    "IterationError",
    "IterationRecord",
    "RunResult",
    "SRSMRunner",
    "SRSMSettings",
    "TerminationConfig",
    "TerminationDecision",
    "check_termination",
    "design_change",
    "objective_change",
    "reduce_domain",
]

DEFAULT_SAMPLES = {"bone_inferior": 125, "bone_superior": 125, "single_articulation": 30, "dual_articulation": 100}
HISTORY_COLUMNS = [
    "iteration",
    "f_verified",
    "best_so_far",
    "region_volume",
    "design_change",
    "objective_change",
    "n_fit",
    "n_failed",
    "stop",
    "reason",
]


class IterationError(RuntimeError):
    pass


class IntegrityError(RuntimeError):
    pass


@dataclass(frozen=True)
class TerminationConfig:
    tol_p: float = 0.01
    tol_f: float = 0.01
    max_iterations: int = 50

    def __post_init__(self):
        if self.tol_p < 0 or self.tol_f < 0:
            raise ValueError("tolerances must be non-negative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class DomainConfig:
    gamma_osc: float = 0.6
    gamma_pan: float = 1.0
    gamma_shrink: float = 0.75
    pan_threshold: float = 0.95
    resolution_floor: float = 0.005  # fraction of the initial range
    reuse_window: float = 1.2


@dataclass(frozen=True)
class TerminationDecision:
    stop: bool
    reason: str | None
    design_change: float
    objective_change: float


def design_change(p_new, p_old, omega_range) -> float:
    """Euclidean design step relative to the norm of the initial range vector."""
    return float(np.linalg.norm(np.asarray(p_new, float) - np.asarray(p_old, float)) / np.linalg.norm(omega_range))


def objective_change(f_new: float, f_old: float) -> float:
    """Relative objective step; absolute when the previous value is zero."""
    if not (math.isfinite(f_new) and math.isfinite(f_old)):
        return math.nan
    if f_old == 0.0:
        return abs(f_new - f_old)
    return abs(f_new - f_old) / abs(f_old)


def check_termination(history: Sequence, cfg: TerminationConfig, omega_range) -> TerminationDecision:
    """Stop test on a history of records exposing ``design`` and ``objective``.

    Criteria in order: design change, objective change, iteration count.
    The first iteration never stops on a tolerance.
    """
    if not history:
        raise ValueError("history must contain at least one record")
    k = len(history)
    dp = df = math.nan
    if k >= 2:
        cur, prev = history[-1], history[-2]
        dp = design_change(cur.design, prev.design, omega_range)
        df = objective_change(cur.objective, prev.objective)
        if dp < cfg.tol_p:
            return TerminationDecision(True, "design_change", dp, df)
        if df < cfg.tol_f:
            return TerminationDecision(True, "objective_change", dp, df)
    if k >= cfg.max_iterations:
        return TerminationDecision(True, "max_iterations", dp, df)
    return TerminationDecision(False, None, dp, df)


def reduce_domain(region: Region, optimum, omega: Region, prev_move=None, cfg: DomainConfig = DomainConfig(), frozen=None):
    """Next region and the move vector ``d`` of this iteration.

    ``frozen`` marks coordinates whose range never changes (discrete levels).
    """
    opt = np.asarray(optimum, dtype=float)
    h = region.half_range
    d = np.clip((opt - region.center) / h, -1.0, 1.0)
    osc = np.zeros_like(d) if prev_move is None else np.sign(d * np.asarray(prev_move, dtype=float))
    gamma = np.where(osc < 0, cfg.gamma_osc, np.where(np.abs(d) >= cfg.pan_threshold, cfg.gamma_pan, cfg.gamma_shrink))
    full = omega.half_range
    new_h = np.minimum(np.maximum(h * gamma, cfg.resolution_floor * 2.0 * full), full)
    center = np.clip(opt, omega.lower + new_h, omega.upper - new_h)
    if frozen is not None:
        fz = np.asarray(frozen, dtype=bool)
        new_h = np.where(fz, full, new_h)
        center = np.where(fz, omega.center, center)
    return Region(center, new_h), d


@dataclass
class EvalRecord:
    id: int
    iteration: int
    values: np.ndarray
    status: str
    scalars: dict
    role: str = "sample"  # sample | verify | baseline
    objective: float = math.nan
    violation: float = math.nan

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def feasible(self) -> bool:
        return self.ok and self.violation <= FEASIBLE_TOL

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "iteration": self.iteration,
            "role": self.role,
            "values": [float(v) for v in self.values],
            "status": self.status,
            "scalars": {k: float(v) for k, v in self.scalars.items()},
            "objective": self.objective,
            "violation": self.violation,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalRecord":
        return cls(d["id"], d["iteration"], np.asarray(d["values"], float), d["status"], dict(d["scalars"]), d["role"], d["objective"], d["violation"])


@dataclass
class IterationRecord:
    k: int
    region: Region
    sample_ids: list
    verify_id: int
    n_fit: int
    model_stats: dict
    optimum: dict
    design: np.ndarray
    objective: float  # verified f at the predicted optimum
    best_objective: float
    best_id: int
    decision: TerminationDecision
    next_region: Region
    move: np.ndarray
    n_failed: int = 0

    def to_dict(self, evals: Sequence[EvalRecord]) -> dict:
        return {
            "k": self.k,
            "region": self.region.to_dict(),
            "sample_ids": list(self.sample_ids),
            "verify_id": self.verify_id,
            "n_fit": self.n_fit,
            "n_failed": self.n_failed,
            "model_stats": self.model_stats,
            "optimum": self.optimum,
            "design": [float(v) for v in self.design],
            "objective": self.objective,
            "best_objective": self.best_objective,
            "best_id": self.best_id,
            "decision": {
                "stop": self.decision.stop,
                "reason": self.decision.reason,
                "design_change": self.decision.design_change,
                "objective_change": self.decision.objective_change,
            },
            "next_region": self.next_region.to_dict(),
            "move": [float(v) for v in self.move],
            "evaluations": [e.to_dict() for e in evals],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "IterationRecord":
        dec = d["decision"]
        return cls(
            k=d["k"],
            region=Region.from_dict(d["region"]),
            sample_ids=list(d["sample_ids"]),
            verify_id=d["verify_id"],
            n_fit=d["n_fit"],
            model_stats=d["model_stats"],
            optimum=d["optimum"],
            design=np.asarray(d["design"], float),
            objective=d["objective"],
            best_objective=d["best_objective"],
            best_id=d["best_id"],
            decision=TerminationDecision(dec["stop"], dec["reason"], dec["design_change"], dec["objective_change"]),
            next_region=Region.from_dict(d["next_region"]),
            move=np.asarray(d["move"], float),
            n_failed=d.get("n_failed", 0),
        )


@dataclass
class RunResult:
    history: list
    best_point: DesignPoint | None
    best_objective: float
    best_feasible: bool
    termination_reason: str | None
    baseline_objective: float
    improvement: float  # percent vs baseline
    evaluations: list = field(default_factory=list)
    run_dir: Path | None = None


@dataclass(frozen=True)
class SRSMSettings:
    samples_per_iteration: int | None = None
    pool_factor: int = 100
    optimizer: OptimizerConfig = OptimizerConfig()
    termination: TerminationConfig = TerminationConfig()
    domain: DomainConfig = DomainConfig()
    seed: int = 0
    parallelism: int = 1
    shape_c: float | None = None
    use_sampling_constraints: bool = True


def improvement_percent(baseline: float, best: float) -> float:
    if not (math.isfinite(baseline) and math.isfinite(best)) or baseline == 0.0:
        return 0.0
    return max(0.0, 100.0 * (baseline - best) / abs(baseline))


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


class SRSMRunner:
    """Holds the problem definition and drives (or resumes) a run.

    ``run_dir`` enables persistence; without it the run stays in memory.
    """

    def __init__(
        self,
        space: DesignSpace,
        evaluator,
        objectives: Sequence[ObjectiveSpec],
        constraints: Sequence[ConstraintSpec] = (),
        settings: SRSMSettings = SRSMSettings(),
        run_dir=None,
        config_dict: Mapping | None = None,
        log: Callable[[str], None] | None = None,
    ):
        if not objectives:
            raise ValueError("at least one objective is required")
        self.space = space
        self.evaluator = evaluator
        self.objectives = list(objectives)
        self.constraints = list(constraints)
        self.settings = settings
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.config_dict = dict(config_dict) if config_dict is not None else None
        self.log = log or (lambda msg: None)
        self.omega = Region.full(space)
        self.frozen = space.discrete_mask
        names = []
        for spec in self.objectives:
            if spec.scalar_name not in names:
                names.append(spec.scalar_name)
        for c in self.constraints:
            if c.response not in names:
                names.append(c.response)
        self.response_names = names
        n = settings.samples_per_iteration
        self.n_samples = int(n) if n is not None else DEFAULT_SAMPLES.get(space.kind, max(10, 2 * space.dim + 1))
        self.evals: list[EvalRecord] = []
        self.history: list[IterationRecord] = []

    # -- evaluation -------------------------------------------------------

    def _score(self, rec: EvalRecord) -> EvalRecord:
        if rec.ok:
            rec.objective = float(weighted_objective(rec.scalars, self.objectives))
            viol = evaluate_constraints(rec.scalars, self.constraints)
            rec.violation = float(max(viol)) if viol else 0.0
        return rec

    def _evaluate_one(self, point: DesignPoint, role: str) -> EvalRecord:
        rs = self.evaluator.evaluate(point)
        scalars = {}
        status = rs.status
        if rs.ok:
            scalars = {k: float(v) for k, v in rs.scalars.items()}
            try:
                scalars.update(reduce_curves(rs.curves, self.objectives, rs.settling_end))
            except (KeyError, ValueError) as exc:
                status = f"failed(curve_error: {exc})"
            missing = [n for n in self.response_names if n not in scalars or not math.isfinite(scalars[n])]
            if status == "ok" and missing:
                status = f"failed(missing_response: {','.join(missing)})"
        return self._score(EvalRecord(point.id, point.iteration, np.asarray(point.values, float), status, scalars, role))

    def _evaluate_many(self, points: Sequence[DesignPoint], role: str) -> list[EvalRecord]:
        workers = max(1, int(self.settings.parallelism))
        if workers == 1 or len(points) == 1:
            return [self._evaluate_one(p, role) for p in points]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda p: self._evaluate_one(p, role), points))

    # -- bookkeeping ------------------------------------------------------

    def _next_id(self) -> int:
        return len(self.evals)

    def _best(self) -> EvalRecord | None:
        ok = [e for e in self.evals if e.ok]
        if not ok:
            return None
        feas = [e for e in ok if e.feasible]
        if feas:
            return min(feas, key=lambda e: (e.objective, e.id))
        return min(ok, key=lambda e: (e.violation, e.objective, e.id))

    def _fit_set(self, region: Region) -> tuple[np.ndarray, np.ndarray]:
        window = region.scaled(self.settings.domain.reuse_window)
        X, Y, seen = [], [], set()
        for e in self.evals:
            if not e.ok or not bool(window.contains(e.values)[0]):
                continue
            key = e.values.tobytes()
            if key in seen:
                continue
            seen.add(key)
            X.append(e.values)
            Y.append([e.scalars[n] for n in self.response_names])
        if not X:
            return np.empty((0, self.space.dim)), np.empty((0, len(self.response_names)))
        return np.asarray(X), np.asarray(Y)

    def fit_models(self, region: Region):
        """Models of every required response over ``region`` from the stored evaluations."""
        X, Y = self._fit_set(region)
        if X.shape[0] == 0:
            raise IterationError("no successful evaluations inside the region")
        return fit_rbf_many(normalize(X, region), Y, self.response_names, shape_c=self.settings.shape_c)

    def load(self) -> None:
        """Read persisted state without running anything."""
        if self.run_dir is None or not (self.run_dir / "state").is_dir():
            raise IntegrityError("no persisted state to load")
        self._load_state()

    # -- one iteration ----------------------------------------------------

    def run_iteration(self, k: int, region: Region, prev_move) -> IterationRecord:
        s = self.settings
        plan = maximin_fill(
            region,
            self.n_samples,
            self.space,
            prior=[DesignPoint(e.values, {}, e.id, e.iteration) for e in self.evals],
            seed=derive_seed(s.seed, k, "sampling"),
            pool_factor=s.pool_factor,
            first_id=self._next_id(),
            iteration=k,
            use_space_constraints=s.use_sampling_constraints,
        )
        recs = self._evaluate_many(plan.points, "sample")
        self.evals.extend(recs)
        failed = [r for r in recs if not r.ok]
        if len(failed) == len(recs):
            reasons = {}
            for r in failed:
                reasons[r.status] = reasons.get(r.status, 0) + 1
            raise IterationError(f"iteration {k}: all {len(recs)} evaluations failed: {reasons}")

        models = self.fit_models(region)
        n_fit = models[0].fit_stats["n_points"]
        stats = {m.response_name: dict(m.fit_stats) for m in models}

        def predicted(Xb):
            P = predict_many(models, normalize(Xb, region))
            return {n: P[:, j] for j, n in enumerate(self.response_names)}

        def f_batch(Xb):
            return np.asarray(weighted_objective(predicted(Xb), self.objectives), dtype=float) * np.ones(Xb.shape[0])

        def g_batch(Xb):
            cols = []
            if self.constraints:
                pr = predicted(Xb)
                cols.append(np.stack([np.asarray(v, float) for v in evaluate_constraints(pr, self.constraints)], axis=1))
            if s.use_sampling_constraints:
                cols.append(sampling_violations(Xb, self.space))
            if not cols:
                return np.zeros((Xb.shape[0], 0))
            return np.concatenate(cols, axis=1)

        report = hybrid_optimize(f_batch, g_batch, region, s.optimizer, space=self.space, seed=derive_seed(s.seed, k, "ga"), iteration=k)
        vpoint = resolve_dependents(report.point.values, self.space, id=self._next_id(), iteration=k)
        vrec = self._evaluate_many([vpoint], "verify")[0]
        self.evals.append(vrec)
        f_k = vrec.objective if vrec.ok else math.nan

        best = self._best()
        partial = self.history + [_Probe(report.point.values, f_k)]
        decision = check_termination(partial, s.termination, self.omega.upper - self.omega.lower)
        next_region, move = reduce_domain(region, report.point.values, self.omega, prev_move, s.domain, self.frozen)
        rec = IterationRecord(
            k=k,
            region=region,
            sample_ids=[r.id for r in recs],
            verify_id=vrec.id,
            n_fit=int(n_fit),
            model_stats=stats,
            optimum=report.to_dict(),
            design=np.asarray(report.point.values, float),
            objective=f_k,
            best_objective=best.objective if best is not None and best.feasible else math.nan,
            best_id=best.id if best is not None else -1,
            decision=decision,
            next_region=next_region,
            move=move,
            n_failed=len(failed) + (0 if vrec.ok else 1),
        )
        return rec

    # -- whole run --------------------------------------------------------

    def run(self, resume: bool = False, max_new_iterations: int | None = None) -> RunResult:
        """Evaluate the baseline, then iterate until a stop criterion fires.

        ``max_new_iterations`` interrupts the loop early (the run stays
        resumable); it exists for checkpoint tests and staged runs.
        """
        lock = None
        if self.run_dir is not None:
            from filelock import FileLock

            self.run_dir.mkdir(parents=True, exist_ok=True)
            lock = FileLock(str(self.run_dir / ".lock"))
            lock.acquire(timeout=0)
        try:
            return self._run(resume, max_new_iterations)
        finally:
            if lock is not None:
                lock.release()

    def _run(self, resume: bool, max_new_iterations: int | None) -> RunResult:
        if resume and self.run_dir is not None and (self.run_dir / "state").is_dir():
            self._load_state()
        else:
            self.evals, self.history = [], []
            if self.run_dir is not None:
                self._write_config()
        if not self.evals:
            base = resolve_dependents(self.space.baseline_vector(), self.space, id=0, iteration=0)
            self.evals.append(self._evaluate_one(base, "baseline"))
            self._save_baseline()
            self.log(f"baseline objective {self.evals[0].objective!r} ({self.evals[0].status})")

        done = 0
        while not (self.history and self.history[-1].decision.stop):
            if max_new_iterations is not None and done >= max_new_iterations:
                break
            k = len(self.history) + 1
            region = self.history[-1].next_region if self.history else self.omega
            prev_move = self.history[-1].move if len(self.history) >= 1 else None
            rec = self.run_iteration(k, region, prev_move)
            self.history.append(rec)
            done += 1
            self._save_iteration(rec)
            self.log(
                f"iteration {k}: f={rec.objective:.6g} best={rec.best_objective:.6g} "
                f"dp={rec.decision.design_change:.4g} df={rec.decision.objective_change:.4g}"
                + (f" -> stop ({rec.decision.reason})" if rec.decision.stop else "")
            )
        return self.result()

    def result(self) -> RunResult:
        best = self._best()
        base = self.evals[0] if self.evals else None
        f_base = base.objective if base is not None and base.ok else math.nan
        point = resolve_dependents(best.values, self.space, best.id, best.iteration) if best is not None else None
        f_best = best.objective if best is not None else math.nan
        reason = self.history[-1].decision.reason if self.history else None
        return RunResult(
            history=list(self.history),
            best_point=point,
            best_objective=f_best,
            best_feasible=bool(best is not None and best.feasible),
            termination_reason=reason,
            baseline_objective=f_base,
            improvement=improvement_percent(f_base, f_best),
            evaluations=list(self.evals),
            run_dir=self.run_dir,
        )

    # -- persistence ------------------------------------------------------

    def _write_config(self):
        if self.config_dict is not None:
            _atomic_write(self.run_dir / "config.json", json.dumps(self.config_dict, indent=2, sort_keys=True) + "\n")

    def _save_baseline(self):
        if self.run_dir is None:
            return
        state = self.run_dir / "state"
        state.mkdir(parents=True, exist_ok=True)
        _atomic_write(state / "iter_000.json", json.dumps({"k": 0, "evaluations": [self.evals[0].to_dict()]}, indent=1) + "\n")

    def _save_iteration(self, rec: IterationRecord):
        if self.run_dir is None:
            return
        state = self.run_dir / "state"
        state.mkdir(parents=True, exist_ok=True)
        mine = [e for e in self.evals if e.iteration == rec.k and e.role != "baseline"]
        _atomic_write(state / f"iter_{rec.k:03d}.json", json.dumps(rec.to_dict(mine), indent=1) + "\n")
        self.write_results()

    def _load_state(self):
        state = self.run_dir / "state"
        files = sorted(state.glob("iter_*.json"))
        self.evals, self.history = [], []
        for path in files:
            data = json.loads(path.read_text(encoding="utf-8"))
            self.evals.extend(EvalRecord.from_dict(e) for e in data["evaluations"])
            if data["k"] > 0:
                self.history.append(IterationRecord.from_dict(data))
        ks = [r.k for r in self.history]
        if ks != list(range(1, len(ks) + 1)):
            raise IntegrityError(f"non-contiguous iteration files in {state}")
        if [e.id for e in self.evals] != list(range(len(self.evals))):
            raise IntegrityError("evaluation ids are not contiguous")

    def write_results(self):
        res_dir = self.run_dir / "results"
        res_dir.mkdir(parents=True, exist_ok=True)
        _atomic_write(res_dir / "history.csv", history_csv(self.history, self.omega))
        best = self._best()
        res = self.result()
        payload = {
            "best_id": best.id if best else None,
            "values": dict(zip(self.space.names, [float(v) for v in best.values])) if best else None,
            "resolved": {k: float(v) for k, v in res.best_point.resolved.items()} if res.best_point else None,
            "objective": res.best_objective,
            "feasible": res.best_feasible,
            "baseline_objective": res.baseline_objective,
            "improvement_percent": res.improvement,
            "termination_reason": res.termination_reason,
            "iterations": len(self.history),
            "scalars": best.scalars if best else None,
        }
        _atomic_write(res_dir / "best_design.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
        write_convergence_svg(res_dir / "convergence.svg", self.history, self.omega)


@dataclass
class _Probe:
    design: np.ndarray
    objective: float


def region_volume(region: Region, omega: Region) -> float:
    return float(np.prod(region.half_range / omega.half_range))


def history_rows(history: Sequence[IterationRecord], omega: Region) -> list[list]:
    rows = []
    for rec in history:
        rows.append(
            [
                rec.k,
                rec.objective,
                rec.best_objective,
                region_volume(rec.region, omega),
                rec.decision.design_change,
                rec.decision.objective_change,
                rec.n_fit,
                rec.n_failed,
                rec.decision.stop,
                rec.decision.reason,
            ]
        )
    return rows


def history_csv(history: Sequence[IterationRecord], omega: Region) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTORY_COLUMNS)
    for row in history_rows(history, omega):
        w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def read_history_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append(
            {
                "iteration": int(r["iteration"]),
                "f_verified": float(r["f_verified"]),
                "best_so_far": float(r["best_so_far"]),
                "region_volume": float(r["region_volume"]),
                "design_change": float(r["design_change"]),
                "objective_change": float(r["objective_change"]),
                "n_fit": int(r["n_fit"]),
                "n_failed": int(r["n_failed"]),
                "stop": r["stop"] == "1",
                "reason": r["reason"] or None,
            }
        )
    return out


def write_convergence_svg(path, history: Sequence[IterationRecord], omega: Region) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ks = [r.k for r in history]
    with matplotlib.rc_context({"svg.hashsalt": "srsm-opt", "svg.fonttype": "none"}):
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
        ax1.plot(ks, [r.objective for r in history], "o-", label="verified optimum")
        ax1.plot(ks, [r.best_objective for r in history], "s--", label="best so far")
        ax1.set_ylabel("objective")
        ax1.legend()
        ax2.semilogy(ks, [region_volume(r.region, omega) for r in history], "o-")
        ax2.set_ylabel("region volume fraction")
        ax2.set_xlabel("iteration")
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    _atomic_write(Path(path), buf.getvalue())


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)
