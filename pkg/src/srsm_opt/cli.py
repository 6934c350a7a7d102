"""Command-line interface: ``srsm-opt {init,run,resume,doe,report,sobol}``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, build_problem, dump_config, load_config, output_root, parse_config, template
from .evaluators import BoneEvaluator
from .problem import CalibrationError, calibrate_weights_doe, save_curves_csv, weighted_objective
from .sensitivity import aggregate_ranking, sobol
from .space import PRESET_NAMES, normalize
from .srsm import (
    IntegrityError,
    IterationError,
    SRSMRunner,
    design_change,
    improvement_percent,
    objective_change,
    read_history_csv,
)
from .surrogate import predict_many

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_INTEGRITY = 0, 1, 2, 3


def _say(args, msg: str) -> None:
    if not getattr(args, "quiet", False):
        print(msg)


def _run_dir(cfg: RunConfig, override: str | None = None) -> Path:
    if override:
        return Path(override)
    if cfg.output_dir:
        p = Path(cfg.output_dir)
        root = os.environ.get("SRSM_OPT_DIR")
        # relative output_dir values live under SRSM_OPT_DIR when it is set
        return Path(root) / p if root and not p.is_absolute() else p
    return output_root() / cfg.name


def _runner(cfg: RunConfig, run_dir: Path, args=None, preset: str | None = None) -> tuple[SRSMRunner, dict]:
    seed = getattr(args, "seed", None) if args is not None else None
    par = getattr(args, "parallelism", None) if args is not None else None
    space, evaluator, objectives, constraints, settings, targets = build_problem(cfg, run_dir, preset, seed, par)
    log = None if args is None or getattr(args, "quiet", False) else print
    data = json.loads(dump_config(cfg))
    if seed is not None:
        data["seed"] = seed
    runner = SRSMRunner(space, evaluator, objectives, constraints, settings, run_dir, config_dict=data, log=log)
    return runner, targets


def summary_lines(runner: SRSMRunner) -> list[str]:
    res = runner.result()
    lines = [
        f"run directory: {runner.run_dir}",
        f"iterations: {len(res.history)}",
        f"termination: {res.termination_reason}",
        f"baseline objective: {res.baseline_objective:.6g}",
        f"best objective: {res.best_objective:.6g} ({'feasible' if res.best_feasible else 'infeasible'})",
        f"improvement {res.improvement:.1f}%",
    ]
    return lines


def _execute(cfg: RunConfig, run_dir: Path, args, resume: bool) -> int:
    if cfg.mode == "split_then_combine":
        return _execute_split(cfg, run_dir, args, resume)
    runner, targets = _runner(cfg, run_dir, args)
    state = run_dir / "state"
    if state.is_dir() and any(state.iterdir()) and not resume:
        print(f"error: {run_dir} already holds a run; use --resume to continue it", file=sys.stderr)
        return EXIT_ERROR
    run_dir.mkdir(parents=True, exist_ok=True)
    if targets:
        save_curves_csv(run_dir / "targets.csv", targets)
    runner.run(resume=resume)
    for line in summary_lines(runner):
        _say(args, line)
    return EXIT_OK


def _execute_split(cfg: RunConfig, run_dir: Path, args, resume: bool) -> int:
    """Independent inferior and superior runs, then one combined evaluation."""
    resolved = {}
    for side in ("inferior", "superior"):
        sub = run_dir / side
        runner, _ = _runner(cfg, sub, args, preset=f"bone_{side}")
        runner.run(resume=resume and (sub / "state").is_dir())
        res = runner.result()
        _say(args, f"[{side}] " + "; ".join(summary_lines(runner)[1:]))
        resolved.update({k: float(v) for k, v in res.best_point.resolved.items()})
    space, evaluator, objectives, constraints, _, _ = build_problem(cfg, run_dir, "bone_inferior")
    both = BoneEvaluator(space, side="both", config=evaluator.config)
    rs = both.evaluate_mapping(resolved)
    payload = {"status": rs.status, "resolved": resolved, "scalars": dict(rs.scalars)}
    if rs.ok:
        payload["objective"] = float(weighted_objective(rs.scalars, objectives))
    (run_dir / "results").mkdir(parents=True, exist_ok=True)
    (run_dir / "results" / "combined.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _say(args, f"combined design: {rs.status} {payload.get('objective', '')}")
    return EXIT_OK


def cmd_init(args) -> int:
    out = Path(args.path)
    out.mkdir(parents=True, exist_ok=True)
    for preset in PRESET_NAMES:
        path = out / f"{preset}.json"
        text = json.dumps(template(preset), indent=2) + "\n"
        parse_config(text, str(path))
        path.write_text(text, encoding="utf-8")
        _say(args, f"wrote {path}")
    return EXIT_OK


def cmd_run(args) -> int:
    if args.resume and not args.config:
        return cmd_resume(argparse.Namespace(**{**vars(args), "run_dir": args.resume}))
    cfg = load_config(args.config)
    run_dir = _run_dir(cfg, args.output)
    return _execute(cfg, run_dir, args, resume=bool(args.resume))


def cmd_resume(args) -> int:
    run_dir = Path(args.run_dir)
    cfg_path = run_dir / "config.json"
    if not cfg_path.is_file():
        print(f"error: {cfg_path} not found; nothing to resume", file=sys.stderr)
        return EXIT_ERROR
    cfg = load_config(cfg_path)
    return _execute(cfg, run_dir, args, resume=True)


def cmd_doe(args) -> int:
    cfg = load_config(args.config)
    names = [o.response for o in cfg.objectives]
    if "d_subsidence" not in names or "d_expulsion" not in names:
        raise ConfigError(f"{args.config}: doe needs d_subsidence and d_expulsion objectives")
    space, evaluator, *_ = build_problem(cfg, None, None, args.seed)
    seed = cfg.seed if args.seed is None else args.seed
    w1, w2, report = calibrate_weights_doe(evaluator, space, n=args.n, seed=seed, pool_factor=cfg.sampler.pool_factor)
    data = json.loads(dump_config(cfg))
    for o in data["objectives"]:
        if o["response"] == "d_subsidence":
            o["weight"] = w1
        elif o["response"] == "d_expulsion":
            o["weight"] = w2
    derived = Path(args.output) if args.output else Path(args.config).with_name(Path(args.config).stem + "_calibrated.json")
    text = json.dumps(data, indent=2) + "\n"
    parse_config(text, str(derived))
    derived.write_text(text, encoding="utf-8")
    report_path = derived.with_name(derived.stem + "_doe.json")
    report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    _say(args, f"n_designs {report['n_designs']}")
    _say(args, f"w1 = {w1!r}")
    _say(args, f"w2 = {w2!r}")
    _say(args, f"derived config: {derived}")
    return EXIT_OK


def verify_history(runner: SRSMRunner) -> list[dict]:
    """Re-derive the termination metrics from the iteration files and compare with history.csv."""
    path = runner.run_dir / "results" / "history.csv"
    if not path.is_file():
        raise IntegrityError(f"{path} missing")
    try:
        rows = read_history_csv(path)
    except (KeyError, ValueError) as exc:
        raise IntegrityError(f"{path}: unreadable ({exc})") from None
    hist = runner.history
    if len(rows) != len(hist):
        raise IntegrityError(f"{path}: {len(rows)} rows but {len(hist)} iteration files")
    omega_range = runner.omega.upper - runner.omega.lower
    evals = runner.evals

    def same(a, b):
        return (math.isnan(a) and math.isnan(b)) or a == b

    for i, (row, rec) in enumerate(zip(rows, hist)):
        dp = design_change(rec.design, hist[i - 1].design, omega_range) if i else math.nan
        df = objective_change(rec.objective, hist[i - 1].objective) if i else math.nan
        upto = [e for e in evals if e.iteration <= rec.k and e.feasible]
        best = min((e.objective for e in upto), default=math.nan)
        checks = {
            "iteration": (row["iteration"], rec.k),
            "f_verified": (row["f_verified"], evals[rec.verify_id].objective),
            "design_change": (row["design_change"], dp),
            "objective_change": (row["objective_change"], df),
            "best_so_far": (row["best_so_far"], best),
        }
        for name, (stored, recomputed) in checks.items():
            if not same(float(stored), float(recomputed)):
                raise IntegrityError(f"{path}: iteration {rec.k} {name} is {stored!r}, recomputed {recomputed!r}")
    return rows


def _load_runner(run_dir: Path, args=None) -> SRSMRunner:
    cfg_path = run_dir / "config.json"
    if not cfg_path.is_file():
        raise IntegrityError(f"{cfg_path} missing")
    cfg = load_config(cfg_path)
    if cfg.mode == "split_then_combine":
        raise ConfigError("report the inferior/ and superior/ sub-runs individually")
    runner, _ = _runner(cfg, run_dir, None)
    runner.load()
    return runner


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    runner = _load_runner(run_dir)
    verify_history(runner)
    res = runner.result()
    base = runner.evals[0]
    best = runner._best()
    print(f"run directory: {run_dir}")
    print(f"iterations: {len(res.history)}")
    print(f"termination: {res.termination_reason or 'not reached (partial run)'}")
    if base.ok and best is not None and best.ok:
        for spec in runner.objectives:
            b = float(weighted_objective(base.scalars, [spec]))
            o = float(weighted_objective(best.scalars, [spec]))
            print(f"  {spec.scalar_name}: {b:.6g} -> {o:.6g} (improvement {improvement_percent(b, o):.1f}%)")
    print(f"combined objective: {res.baseline_objective:.6g} -> {res.best_objective:.6g}")
    print(f"improvement {res.improvement:.1f}%")
    sens = run_dir / "results" / "sensitivity_ranking.csv"
    if sens.is_file():
        with open(sens, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))[:5]
        print("Sobol top-5 (aggregate total index):")
        for r in rows:
            print(f"  {r['variable']}: {float(r['score']):.4f}")
    print("integrity: history.csv matches recomputed termination metrics")
    return EXIT_OK


def cmd_sobol(args) -> int:
    run_dir = Path(args.run_dir)
    runner = _load_runner(run_dir)
    if not runner.history:
        raise IntegrityError("no completed iteration to analyse")
    region = runner.history[-1].region
    models = runner.fit_models(region)
    names = runner.space.names
    results, weights = [], []
    for spec in runner.objectives:
        j = runner.response_names.index(spec.scalar_name)

        def fn(X, j=j, spec=spec):
            vals = predict_many([models[j]], normalize(X, region))[:, 0]
            return np.asarray(weighted_objective({spec.scalar_name: vals}, [spec]), dtype=float)

        results.append(sobol(fn, region, args.n_base, args.seed, names, spec.scalar_name, runner.space))
        weights.append(spec.weight)
    out = run_dir / "results"
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sensitivity.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "objective", "S", "S_T"])
        for r in results:
            for n in names:
                w.writerow([n, r.objective, repr(r.first_order[n]), repr(r.total[n])])
    ranking = aggregate_ranking(results, weights)
    with open(out / "sensitivity_ranking.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "variable", "score"])
        for i, (n, s) in enumerate(ranking, 1):
            w.writerow([i, n, repr(s)])
    flags = sorted({f for r in results for f in r.flags})
    _say(args, "rank  variable  score")
    for i, (n, s) in enumerate(ranking, 1):
        _say(args, f"{i:4d}  {n}  {s:.4f}")
    if flags:
        _say(args, "flags: " + ", ".join(flags))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="srsm-opt", description="Sequential metamodel-based design optimization")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("init", help="write template configs for the four implant problems")
    s.add_argument("path", nargs="?", default=".")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_init)

    s = sub.add_parser("run", help="run an optimization")
    s.add_argument("--config")
    s.add_argument("--resume", nargs="?", const=True, default=False, help="continue an interrupted run (optionally give its directory)")
    s.add_argument("--seed", type=int)
    s.add_argument("--parallelism", type=int)
    s.add_argument("--output", help="run directory (overrides output_dir)")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("resume", help="continue a run from its directory")
    s.add_argument("run_dir")
    s.add_argument("--parallelism", type=int)
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_resume, seed=None)

    s = sub.add_parser("doe", help="calibrate the displacement weights")
    s.add_argument("--config", required=True)
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--seed", type=int)
    s.add_argument("--output", help="path of the derived config")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_doe)

    s = sub.add_parser("report", help="summarize a run and check its integrity")
    s.add_argument("run_dir")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("sobol", help="Sobol indices on the final metamodels")
    s.add_argument("run_dir")
    s.add_argument("--n-base", type=int, default=8192)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_sobol)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run" and not args.config and not args.resume:
        print("error: run needs --config (or --resume RUN_DIR)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrityError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (IterationError, CalibrationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
