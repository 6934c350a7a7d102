"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N PASS|FAIL`` line (visible with or
without ``-s``) together with its wall time.
"""

import json
import math
import os
import signal
import subprocess
import sys
import time
from contextlib import contextmanager
from types import SimpleNamespace

import numpy as np
import pytest

from srsm_opt.cli import main
from srsm_opt.config import build_problem, load_config, template
from srsm_opt.evaluators import BoneEvaluator, SpineEvaluator
from srsm_opt.optimizer import OptimizerConfig, hybrid_optimize
from srsm_opt.problem import reduce_curves, weighted_objective
from srsm_opt.sensitivity import sobol
from srsm_opt.space import PRESET_NAMES, Region, check_sampling_constraints, get_preset, resolve_dependents
from srsm_opt.srsm import TerminationConfig, check_termination, objective_change, read_history_csv
from srsm_opt.surrogate import fit_rbf, predict

from test_optimizer import grid_oracle, three_wells
from test_space import DUAL_DEP, LOOSE, SINGLE_DEP, TABLES


@contextmanager
def criterion(capsys, n, title, limit=None):
    t0 = time.perf_counter()
    ok = False
    try:
        yield
        if limit is not None:
            assert time.perf_counter() - t0 < limit, f"took longer than {limit} s"
        ok = True
    finally:
        with capsys.disabled():
            print(f"\ncriterion {n} {'PASS' if ok else 'FAIL'} ({time.perf_counter() - t0:.2f} s): {title}")


def test_criterion_1_rbf_exactness(capsys):
    with criterion(capsys, 1, "RBF reproduces 30 designs in [0,1]^7 to 1e-6 relative", limit=1.0):
        rng = np.random.default_rng(2024)
        x = rng.random((30, 7))
        y = np.exp(-np.sum((x - 0.4) ** 2, axis=1)) + np.sin(2 * x[:, 0]) * x[:, 3] + 0.5 * x[:, 6] ** 2
        model = fit_rbf(x, y)
        err = np.abs(predict(model, x) - y)
        assert np.all(err <= 1e-6 * (1 + np.abs(y))), err.max()


def test_criterion_2_optimizer_vs_oracle(capsys):
    with criterion(capsys, 2, "hybrid optimizer within 1e-3 of grid oracle and analytic minimum", limit=30.0):
        unit = Region.from_bounds([0.0, 0.0], [1.0, 1.0])
        lo, hi, _ = grid_oracle(three_wells)
        rep = hybrid_optimize(three_wells, None, unit, OptimizerConfig(), seed=0)
        assert (rep.predicted_objective - lo) / (hi - lo) <= 1e-3

        region = Region.from_bounds([-3.0, 10.0, 0.0, -1.0], [3.0, 30.0, 0.1, 1.0])
        target = np.array([1.2, 14.0, 0.07, -0.35])
        scale = 2 * region.half_range
        rep = hybrid_optimize(lambda X: np.sum(((X - target) / scale) ** 2, axis=1), None, region, OptimizerConfig(), seed=0)
        assert np.linalg.norm((rep.point.values - target) / scale) <= 1e-3


def test_criterion_3_termination_arithmetic(capsys):
    def rec(p, f):
        return SimpleNamespace(design=np.asarray(p, float), objective=f)

    with criterion(capsys, 3, "termination decisions on constructed histories"):
        omega = np.array([4.0, 4.0])
        cfg = TerminationConfig()
        assert objective_change(1.985, 2.0) == pytest.approx(0.0075, abs=1e-15)
        dec = check_termination([rec([0, 0], 2.0), rec([1, 1], 1.985)], cfg, omega)
        assert (dec.stop, dec.reason) == (True, "objective_change")
        dec = check_termination([rec([1, 2], 9.0), rec([1, 2], 3.0)], cfg, omega)
        assert (dec.stop, dec.reason, dec.design_change) == (True, "design_change", 0.0)
        hist = [rec([k % 2 * 2.0, 0], 1.0 + k % 2) for k in range(50)]
        assert check_termination(hist[:49], cfg, omega).stop is False
        assert check_termination(hist, cfg, omega).reason == "max_iterations"
        dec = check_termination([rec([0, 0], 2.0), rec([0.02, 0], 1.5)], cfg, omega)
        # small step, large objective change: the design criterion is checked first
        assert (dec.stop, dec.reason) == (True, "design_change")
        assert dec.design_change == pytest.approx(0.02 / math.sqrt(32.0)) and dec.objective_change == 0.25
        dec = check_termination([rec([0, 0], 2.0), rec([0.2, 0], 1.5)], cfg, omega)
        assert dec.stop is False


def test_criterion_4_sobol(capsys):
    with criterion(capsys, 4, "Sobol linear ratios within 0.05, interaction within 0.1", limit=30.0):
        a, b = 2.0, 1.0
        res = sobol(lambda X: a * X[:, 0] + b * X[:, 1], Region.from_bounds([0, 0], [1, 1]), n_base=4096, seed=11)
        assert res.first_order["x0"] == pytest.approx(a * a / (a * a + b * b), abs=0.05)
        assert res.first_order["x1"] == pytest.approx(b * b / (a * a + b * b), abs=0.05)
        res = sobol(lambda X: X[:, 0] * X[:, 1], Region.from_bounds([-1, -1], [1, 1]), n_base=4096, seed=12)
        for n in ("x0", "x1"):
            assert abs(res.first_order[n]) <= 0.1
            assert abs(res.total[n] - 1.0) <= 0.1


def test_criterion_5_table_fidelity(capsys):
    with criterion(capsys, 5, "design tables inside bounds, dependents reproduced, baselines feasible"):
        for name in PRESET_NAMES:
            space = get_preset(name)
            table = TABLES[name]
            for col in (2, 3):
                x = space.vector({k: v[col] for k, v in table.items()})
                assert space.in_bounds(x), (name, col)
            base = resolve_dependents(space.baseline_vector(), space)
            assert check_sampling_constraints(base, space=space).feasible, name
        for name, deps in (("single_articulation", SINGLE_DEP), ("dual_articulation", DUAL_DEP)):
            space = get_preset(name)
            for j, col in enumerate((2, 3)):
                r = space.resolve(space.vector({k: v[col] for k, v in TABLES[name].items()}))
                for dep, values in deps.items():
                    tol = 0.05 if dep in LOOSE else 0.02
                    assert abs(r[dep] - values[j]) <= tol * abs(values[j]), (name, dep, col)


def test_criterion_6_spine_calibration(capsys):
    targets = {
        "angle_flexion": 5.48,
        "translation_flexion": 1.03,
        "angle_extension": -6.16,
        "peak_facet_extension": 53.77,
        "peak_facet_axial_rotation": 47.41,
        "peak_facet_lateral_bending": 8.04,
        "peak_strain_interspinal_flexion": 0.638,
    }
    with criterion(capsys, 6, "intact spine surrogate matches the calibration values within 10%", limit=10.0):
        rs = SpineEvaluator(mode="intact").evaluate(np.zeros(0))
        assert rs.ok
        for k, v in targets.items():
            assert abs(rs.scalars[k] - v) <= 0.10 * abs(v), (k, rs.scalars[k])


def _write(path, data):
    path.write_text(json.dumps(data, indent=2) + "\n")
    return path


def test_criterion_7_single_articulation_run(tmp_path, capsys):
    with criterion(capsys, 7, "curve-matching run: <=50 iterations, monotone best, >=20% better, synthetic joint scores 0", limit=300.0):
        cfg_path = _write(tmp_path / "single.json", template("single_articulation"))
        out = tmp_path / "single"
        assert main(["run", "--config", str(cfg_path), "--output", str(out), "--quiet"]) == 0
        rows = read_history_csv(out / "results/history.csv")
        best = json.loads((out / "results/best_design.json").read_text())
        assert len(rows) <= 50 and rows[-1]["stop"]
        bs = [r["best_so_far"] for r in rows]
        assert all(np.isfinite(bs)) and all(b2 <= b1 for b1, b2 in zip(bs, bs[1:]))
        assert best["feasible"] and best["improvement_percent"] >= 20.0

        cfg = load_config(cfg_path)
        space, _, objectives, _, _, _ = build_problem(cfg)
        synth = SpineEvaluator(space, mode="synthetic").evaluate(space.baseline_vector())
        scalars = dict(synth.scalars)
        scalars.update(reduce_curves(synth.curves, objectives, synth.settling_end))
        assert float(weighted_objective(scalars, objectives)) == 0.0


def test_criterion_8_bone_run(tmp_path, capsys):
    with criterion(capsys, 8, "calibrated bone run improves the baseline and meets stress/micromotion limits", limit=300.0):
        cfg_path = _write(tmp_path / "bone.json", template("bone_inferior"))
        cal = tmp_path / "bone_cal.json"
        assert main(["doe", "--config", str(cfg_path), "--output", str(cal), "--quiet"]) == 0
        report = json.loads((tmp_path / "bone_cal_doe.json").read_text())
        data = json.loads(cal.read_text())
        w = {o["response"]: o["weight"] for o in data["objectives"]}
        space = get_preset("bone_inferior")
        ev = BoneEvaluator(space)
        resp = [ev.evaluate(np.array(p)).scalars for p in report["points"]]
        sub = w["d_subsidence"] * np.mean([abs(r["d_subsidence"]) for r in resp])
        exp = w["d_expulsion"] * np.mean([abs(r["d_expulsion"]) for r in resp])
        assert report["n_designs"] == 100
        assert abs(sub - exp) <= 1e-9 * max(sub, exp)

        data["sampler"]["samples_per_iteration"] = 40
        _write(cal, data)
        out = tmp_path / "bone_run"
        assert main(["run", "--config", str(cal), "--output", str(out), "--quiet"]) == 0
        best = json.loads((out / "results/best_design.json").read_text())
        assert best["objective"] < best["baseline_objective"]
        assert best["feasible"]
        assert best["scalars"]["sigma_max"] <= 0.3 and best["scalars"]["d_micro"] <= 0.150


def _small_bone_config(path, iterations):
    cfg = template("bone_inferior")
    cfg["sampler"] = {"samples_per_iteration": 15, "pool_factor": 30}
    cfg["optimizer"] = {"population": 30, "generations": 40, "refine_steps": 30}
    cfg["termination"] = {"tol_p": 0.0, "tol_f": 0.0, "max_iterations": iterations}
    cfg["seed"] = 5
    return _write(path, cfg)


def test_criterion_9_determinism_and_resume(tmp_path, capsys):
    with criterion(capsys, 9, "identical runs are byte-identical and kill-resume equals an uninterrupted run"):
        cfg = _small_bone_config(tmp_path / "c.json", 6)
        for name in ("a", "b"):
            assert main(["run", "--config", str(cfg), "--output", str(tmp_path / name), "--quiet"]) == 0
        ref = (tmp_path / "a/results/history.csv").read_bytes()
        assert (tmp_path / "b/results/history.csv").read_bytes() == ref
        assert len(ref.splitlines()) == 7

        killed = tmp_path / "killed"
        env = {**os.environ, "PYTHONPATH": os.pathsep.join(sys.path)}
        proc = subprocess.Popen(
            [sys.executable, "-m", "srsm_opt", "run", "--config", str(cfg), "--output", str(killed), "--quiet"],
            env=env,
        )
        deadline = time.time() + 120
        while not (killed / "state/iter_002.json").exists() and proc.poll() is None and time.time() < deadline:
            time.sleep(0.01)
        interrupted = proc.poll() is None
        proc.send_signal(signal.SIGKILL)
        proc.wait()
        assert interrupted, "run finished before it could be killed"
        assert not (killed / "state/iter_006.json").exists()
        assert main(["resume", str(killed), "--quiet"]) == 0
        assert (killed / "results/history.csv").read_bytes() == ref
        a = json.loads((tmp_path / "a/results/best_design.json").read_text())
        k = json.loads((killed / "results/best_design.json").read_text())
        assert a == k
