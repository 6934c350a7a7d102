import math
from types import SimpleNamespace

import numpy as np
import pytest

from srsm_opt.evaluators import FunctionEvaluator, ResponseSet, box_space
from srsm_opt.optimizer import OptimizerConfig
from srsm_opt.problem import ObjectiveSpec
from srsm_opt.space import Region
from srsm_opt.srsm import (
    DomainConfig,
    IterationError,
    SRSMRunner,
    SRSMSettings,
    TerminationConfig,
    check_termination,
    design_change,
    improvement_percent,
    objective_change,
    read_history_csv,
    reduce_domain,
)

FAST = OptimizerConfig(population=30, generations=40, refine_steps=30)
F = [ObjectiveSpec("weighted_scalar", "f")]


def rec(design, objective):
    return SimpleNamespace(design=np.asarray(design, float), objective=objective)


def runner(fn, space, run_dir=None, **kw):
    settings = SRSMSettings(**{"samples_per_iteration": 12, "optimizer": FAST, "pool_factor": 30, **kw})
    return SRSMRunner(space, FunctionEvaluator(fn, space), F, settings=settings, run_dir=run_dir)


# -- termination arithmetic ------------------------------------------------


def test_objective_tolerance_hand_case():
    omega = np.array([10.0, 10.0])
    hist = [rec([0.0, 0.0], 2.0), rec([5.0, 5.0], 1.985)]
    dec = check_termination(hist, TerminationConfig(), omega)
    assert objective_change(1.985, 2.0) == pytest.approx(0.0075, abs=1e-15)
    assert dec.stop and dec.reason == "objective_change"
    assert dec.design_change == pytest.approx(np.sqrt(50.0) / np.sqrt(200.0))


def test_identical_design_fires_first():
    hist = [rec([1.0, 2.0], 5.0), rec([1.0, 2.0], 1.0)]
    dec = check_termination(hist, TerminationConfig(), np.array([1.0, 1.0]))
    assert (dec.stop, dec.reason, dec.design_change) == (True, "design_change", 0.0)


def test_iteration_cap_and_first_iteration():
    big = [rec([float(i % 2)], 10.0 ** (i % 2)) for i in range(50)]
    dec = check_termination(big, TerminationConfig(), np.array([1.0]))
    assert dec.reason == "max_iterations"
    assert not check_termination(big[:49], TerminationConfig(), np.array([1.0])).stop
    first = check_termination([rec([0.0], 0.0)], TerminationConfig(max_iterations=2), np.array([1.0]))
    assert not first.stop and math.isnan(first.design_change)
    with pytest.raises(ValueError):
        check_termination([], TerminationConfig(), np.array([1.0]))


def test_change_measures():
    assert objective_change(0.005, 0.0) == 0.005
    assert math.isnan(objective_change(math.nan, 1.0))
    assert design_change([3.0, 4.0], [0.0, 0.0], [10.0, 0.0]) == 0.5
    with pytest.raises(ValueError):
        TerminationConfig(max_iterations=0)


def test_improvement_percent():
    assert improvement_percent(2.0, 1.708) == pytest.approx(14.6)
    assert improvement_percent(1.0, 1.2) == 0.0
    assert improvement_percent(math.nan, 1.0) == 0.0


# -- domain reduction -------------------------------------------------------


OMEGA = Region.from_bounds([0.0, 0.0], [10.0, 10.0])


def test_shrink_at_center():
    region = Region(np.array([5.0, 5.0]), np.array([2.0, 2.0]))
    new, d = reduce_domain(region, [5.0, 5.0], OMEGA, prev_move=np.array([0.3, -0.3]))
    assert np.array_equal(d, [0.0, 0.0])
    assert np.allclose(new.half_range, [1.5, 1.5]) and np.allclose(new.center, [5.0, 5.0])


def test_pan_on_boundary_until_clipped():
    region = Region(np.array([5.0, 5.0]), np.array([2.0, 2.0]))
    new, d = reduce_domain(region, [7.0, 5.0], OMEGA)
    assert d[0] == 1.0
    assert new.half_range[0] == 2.0 and new.center[0] == 7.0
    edge = Region(np.array([8.0, 5.0]), np.array([2.0, 2.0]))
    new, _ = reduce_domain(edge, [10.0, 5.0], OMEGA)
    assert new.upper[0] == 10.0 and new.half_range[0] == 2.0


def test_oscillation_uses_gamma_osc():
    region = Region(np.array([5.0, 5.0]), np.array([2.0, 2.0]))
    new, d = reduce_domain(region, [6.0, 5.0], OMEGA, prev_move=np.array([-0.5, 0.0]))
    assert d[0] == 0.5
    assert new.half_range[0] == pytest.approx(2.0 * 0.6)
    assert new.half_range[1] == pytest.approx(2.0 * 0.75)


def test_resolution_floor_and_frozen():
    region = Region(np.array([5.0, 5.0]), np.array([0.05, 0.05]))
    new, _ = reduce_domain(region, [5.0, 5.0], OMEGA, frozen=np.array([False, True]))
    assert new.half_range[0] == pytest.approx(0.005 * 2 * 5.0)
    assert new.half_range[1] == 5.0 and new.center[1] == 5.0


def test_region_stays_inside_omega(rng):
    region = OMEGA
    move = None
    for _ in range(40):
        opt = rng.uniform(region.lower, region.upper)
        region, move = reduce_domain(region, opt, OMEGA, move, DomainConfig())
        assert np.all(region.lower >= -1e-12) and np.all(region.upper <= 10.0 + 1e-12)


# -- iterations and runs ----------------------------------------------------


def test_first_iteration_beats_best_sample():
    space = box_space([-1, -1], [1, 1], baseline=[0.9, 0.9])
    r = runner(lambda x: float(np.sum((x - 0.2) ** 2)), space, samples_per_iteration=15)
    res = r.run(max_new_iterations=1)
    it = res.history[0]
    samples = [e.objective for e in res.evaluations if e.role == "sample"]
    assert it.objective <= min(samples) + 0.05 * (max(samples) - min(samples))
    assert r.evals[it.verify_id].role == "verify"


def test_half_failed_samples_are_marked():
    space = box_space([0, 0], [1, 1], baseline=[0.5, 0.5])

    def fn(x):
        if x[0] < 0.5:
            return ResponseSet.failed("solver_diverged")
        return float(np.sum(x**2))

    r = runner(fn, space, samples_per_iteration=16)
    res = r.run(max_new_iterations=1)
    samples = [e for e in res.evaluations if e.role == "sample"]
    bad = [e for e in samples if not e.ok]
    assert {e.id for e in bad} == {e.id for e in samples if e.values[0] < 0.5}
    assert all(e.status == "failed(solver_diverged)" for e in bad)
    assert res.history[0].n_failed >= len(bad)


def test_all_failed_raises():
    space = box_space([0], [1], baseline=[0.5])
    r = runner(lambda x: ResponseSet.failed("boom"), space, samples_per_iteration=4)
    with pytest.raises(IterationError, match="all 4 evaluations failed"):
        r.run()


def test_single_variable_smoke():
    space = box_space([-2.0], [3.0], baseline=[2.5])
    r = runner(lambda x: float((x[0] - 1.0) ** 2), space, samples_per_iteration=5)
    res = r.run(max_new_iterations=1)
    assert -2.0 <= res.history[0].design[0] <= 3.0


def test_sphere_converges():
    space = box_space([-5, -5, -5], [5, 5, 5], baseline=[4.0, -4.0, 3.0])
    c = np.array([1.0, -2.0, 0.5])
    r = runner(lambda x: 1.0 + float(np.sum((x - c) ** 2)), space, samples_per_iteration=20)
    res = r.run()
    assert len(res.history) < 50
    assert res.termination_reason in ("objective_change", "design_change")
    assert res.best_objective <= 1.01
    best = [h.best_objective for h in res.history]
    assert all(b2 <= b1 for b1, b2 in zip(best, best[1:]))
    assert all(Region.full(space).contains(h.region.lower)[0] and Region.full(space).contains(h.region.upper)[0] for h in res.history)


def test_constant_function_stops_at_two():
    space = box_space([0, 0], [1, 1], baseline=[0.5, 0.5])
    res = runner(lambda x: 3.0, space).run()
    assert len(res.history) == 2
    assert res.termination_reason in ("objective_change", "design_change")
    assert res.improvement == 0.0


def test_zero_tolerances_run_to_cap():
    space = box_space([0, 0], [1, 1], baseline=[0.5, 0.5])
    term = TerminationConfig(tol_p=0.0, tol_f=0.0, max_iterations=4)
    res = runner(lambda x: 2.0 + float(np.sum(x)), space, termination=term, samples_per_iteration=6).run()
    assert len(res.history) == 4 and res.termination_reason == "max_iterations"


def test_best_so_far_counts_feasible_only():
    space = box_space([0, 0], [1, 1], baseline=[0.9, 0.9])
    spec = [ObjectiveSpec("weighted_scalar", "f")]
    from srsm_opt.problem import ConstraintSpec

    ev = FunctionEvaluator(lambda x: {"f": float(x[0] + x[1]), "g": float(x[0])}, space)
    r = SRSMRunner(
        space,
        ev,
        spec,
        [ConstraintSpec("g", 0.3, ">=")],
        SRSMSettings(samples_per_iteration=10, optimizer=FAST, pool_factor=30),
    )
    res = r.run(max_new_iterations=2)
    feasible = [e.objective for e in res.evaluations if e.ok and e.scalars["g"] >= 0.3]
    assert res.history[-1].best_objective == min(feasible)
    assert res.best_point.values[0] >= 0.3


def test_determinism_and_resume(tmp_path):
    space = box_space([-3, -3], [3, 3], baseline=[2.0, 2.0])
    fn = lambda x: 1.0 + float((x[0] - 0.4) ** 2 + 2 * (x[1] + 0.7) ** 2)  # noqa: E731
    full = runner(fn, space, tmp_path / "a", seed=7).run()
    again = runner(fn, space, tmp_path / "b", seed=7).run()
    assert (tmp_path / "a/results/history.csv").read_bytes() == (tmp_path / "b/results/history.csv").read_bytes()

    runner(fn, space, tmp_path / "c", seed=7).run(max_new_iterations=2)
    resumed = runner(fn, space, tmp_path / "c", seed=7).run(resume=True)
    assert (tmp_path / "a/results/history.csv").read_bytes() == (tmp_path / "c/results/history.csv").read_bytes()
    assert resumed.best_objective == full.best_objective == again.best_objective
    assert np.array_equal(resumed.best_point.values, full.best_point.values)
    rows = read_history_csv(tmp_path / "c/results/history.csv")
    assert [row["iteration"] for row in rows] == list(range(1, len(full.history) + 1))
    assert (tmp_path / "c/state/iter_000.json").exists()
    assert (tmp_path / "c/results/convergence.svg").exists()


def test_parallelism_does_not_change_results(tmp_path):
    space = box_space([-1, -1], [1, 1], baseline=[0.8, 0.8])
    fn = lambda x: 1.0 + float(np.sum(x**2))  # noqa: E731
    a = runner(fn, space, tmp_path / "p1", parallelism=1).run(max_new_iterations=2)
    b = runner(fn, space, tmp_path / "p4", parallelism=4).run(max_new_iterations=2)
    assert (tmp_path / "p1/results/history.csv").read_bytes() == (tmp_path / "p4/results/history.csv").read_bytes()
    assert a.best_objective == b.best_objective
