import numpy as np
import pytest

from srsm_opt.sensitivity import SobolResult, aggregate_ranking, sobol
from srsm_opt.space import Region

UNIT2 = Region.from_bounds([0.0, 0.0], [1.0, 1.0])


def test_single_variable_dependence():
    res = sobol(lambda X: X[:, 0], UNIT2, n_base=4096, seed=0)
    assert res.first_order["x0"] == pytest.approx(1.0, abs=0.05)
    assert res.first_order["x1"] == pytest.approx(0.0, abs=0.05)
    assert res.total["x1"] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("a,b", [(1.0, 2.0), (3.0, -1.0), (1.0, 1.0)])
def test_linear_matches_variance_ratio(a, b):
    # uniform inputs share the same variance, so S_i = a_i^2 / (a^2 + b^2)
    res = sobol(lambda X: a * X[:, 0] + b * X[:, 1], UNIT2, n_base=4096, seed=1)
    s0 = a * a / (a * a + b * b)
    assert res.first_order["x0"] == pytest.approx(s0, abs=0.05)
    assert res.first_order["x1"] == pytest.approx(1 - s0, abs=0.05)
    assert 0.9 <= sum(res.first_order.values()) <= 1.1


def test_pure_interaction():
    box = Region.from_bounds([-1.0, -1.0], [1.0, 1.0])
    res = sobol(lambda X: X[:, 0] * X[:, 1], box, n_base=4096, seed=2)
    for n in ("x0", "x1"):
        assert res.first_order[n] == pytest.approx(0.0, abs=0.1)
        assert res.total[n] == pytest.approx(1.0, abs=0.1)


def test_constant_flag_and_validation():
    res = sobol(lambda X: np.full(len(X), 4.0), UNIT2, n_base=64)
    assert res.flags == ("constant_function",)
    assert res.first_order == {"x0": 0.0, "x1": 0.0}
    with pytest.raises(ValueError):
        sobol(lambda X: X[:, 0], UNIT2, n_base=32)


def test_deterministic_and_permutation():
    fn = lambda X: X[:, 0] + 3 * X[:, 1] ** 2 + X[:, 0] * X[:, 2]  # noqa: E731
    box = Region.from_bounds([0, 0, 0], [1, 1, 1])
    a = sobol(fn, box, 1024, seed=5)
    assert a == sobol(fn, box, 1024, seed=5)
    perm = [2, 0, 1]
    b = sobol(lambda X: fn(X[:, np.argsort(perm)]), box, 4096, seed=6, names=[f"x{p}" for p in perm])
    ref = sobol(fn, box, 4096, seed=6)
    for n in ref.total:
        assert b.total[n] == pytest.approx(ref.total[n], abs=0.05)


def test_larger_sample_is_closer():
    a, b = 1.0, 2.0
    fn = lambda X: a * X[:, 0] + b * X[:, 1]  # noqa: E731
    err = []
    for n in (512, 8192):
        errs = [abs(sobol(fn, UNIT2, n, seed=s).first_order["x0"] - 0.2) for s in range(8)]
        err.append(np.mean(errs))
    assert err[1] < err[0]


def _result(total, var):
    return SobolResult(dict(total), dict(total), 100, variance=var)


def test_aggregate_examples():
    single = _result({"x1": 0.2, "x2": 0.7, "x3": 0.1}, 1.0)
    assert [n for n, _ in aggregate_ranking([single])] == ["x2", "x1", "x3"]
    assert aggregate_ranking([single, single]) == aggregate_ranking([single])
    obj_a = _result({"x1": 0.9, "x2": 0.1}, 1.0)
    obj_b = _result({"x1": 0.05, "x2": 0.95}, 1e-6)
    ranked = aggregate_ranking([obj_a, obj_b])
    assert ranked[0][0] == "x1"
    # hand value: (1 * 0.9 + 1e-6 * 0.05) / (1 + 1e-6)
    assert ranked[0][1] == pytest.approx((0.9 + 0.05e-6) / (1 + 1e-6), rel=1e-12)
    assert aggregate_ranking([obj_a, obj_b], weights=[0.0, 1.0])[0][0] == "x2"
    with pytest.raises(ValueError):
        aggregate_ranking([])
