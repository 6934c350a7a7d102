import numpy as np
import pytest

from srsm_opt.surrogate import (
    DuplicateCentersError,
    RBFModel,
    default_shape,
    fit_rbf,
    fit_rbf_many,
    loo_error,
    predict,
    predict_many,
)


def _oracle_predict(centers, y, c, x):
    """Independent dense solve of the multiquadric system with a constant term."""
    n = len(centers)
    phi = np.sqrt(((centers[:, None, :] - centers[None, :, :]) ** 2).sum(-1) + c * c)
    a = np.block([[phi, np.ones((n, 1))], [np.ones((1, n)), np.zeros((1, 1))]])
    sol = np.linalg.solve(a, np.append(y, 0.0))
    px = np.sqrt(((x[:, None, :] - centers[None, :, :]) ** 2).sum(-1) + c * c)
    return px @ sol[:n] + sol[n]


def test_single_point():
    m = fit_rbf(np.array([[0.3, 0.4]]), [5.0])
    assert predict(m, [0.3, 0.4]) == pytest.approx(5.0)
    assert m.shape_c == 1.0


def test_constant_data(rng):
    x = rng.random((10, 3))
    m = fit_rbf(x, np.full(10, 3.0))
    assert np.allclose(predict(m, x), 3.0, atol=1e-8)


def test_square_at_three_points():
    x = np.array([[0.0], [0.5], [1.0]])
    m = fit_rbf(x, [0.0, 0.25, 1.0])
    assert np.allclose(predict(m, x), [0.0, 0.25, 1.0], atol=1e-8)


def test_matches_dense_oracle(rng):
    x = rng.random((25, 4))
    y = np.sin(3 * x[:, 0]) + x[:, 1] * x[:, 2] - x[:, 3] ** 2
    m = fit_rbf(x, y)
    probes = rng.random((40, 4))
    assert np.allclose(predict(m, probes), _oracle_predict(x, y, m.shape_c, probes), rtol=1e-8, atol=1e-9)
    assert m.fit_stats["ridge"] == 0.0


def test_linear_two_points_small_shape():
    # two centres: w1 = -w0 by the side condition, so the model is linear in between
    m = fit_rbf(np.array([[0.0], [1.0]]), [0.0, 2.0], shape_c=1e-3)
    assert predict(m, [0.5]) == pytest.approx(1.0, rel=0.05)


def test_symmetric_data_symmetric_prediction():
    x = np.linspace(0, 1, 7)[:, None]
    y = (x[:, 0] - 0.5) ** 2
    m = fit_rbf(x, y)
    for delta in (0.05, 0.13, 0.31):
        assert predict(m, [0.5 - delta]) == pytest.approx(predict(m, [0.5 + delta]), abs=1e-9)


def test_affine_equivariance(rng):
    x = rng.random((15, 2))
    y = np.cos(4 * x[:, 0]) * x[:, 1]
    m1 = fit_rbf(x, y)
    m2 = fit_rbf(x, 3.5 * y - 2.0)
    probes = rng.random((20, 2))
    assert np.allclose(predict(m2, probes), 3.5 * predict(m1, probes) - 2.0, atol=1e-9)


def test_default_shape_is_mean_nn_distance():
    x = np.array([[0.0], [1.0], [3.0]])
    # nearest neighbours: 1, 1, 2
    assert default_shape(x) == pytest.approx(4.0 / 3.0)


def test_duplicate_centers_rejected():
    with pytest.raises(DuplicateCentersError):
        fit_rbf(np.array([[0.1, 0.2], [0.1, 0.2], [0.5, 0.5]]), [1, 2, 3])


def test_ridge_fallback_on_ill_conditioning():
    # nearly coincident centres with a huge shape parameter
    x = np.array([[0.0], [1e-7], [1.0], [0.5]])
    m = fit_rbf(x, [0.0, 1e-7, 1.0, 0.5], shape_c=100.0)
    assert m.fit_stats["ridge"] > 0
    assert np.all(np.isfinite(m.weights))


def test_shared_fit_equals_individual(rng):
    x = rng.random((12, 3))
    y = np.stack([x.sum(1), np.prod(x, 1)], axis=1)
    many = fit_rbf_many(x, y, ["s", "p"])
    for j, name in enumerate(["s", "p"]):
        one = fit_rbf(x, y[:, j], response_name=name)
        assert np.allclose(many[j].weights, one.weights)
        assert many[j].response_name == name
    probes = rng.random((9, 3))
    assert np.allclose(predict_many(many, probes), np.stack([predict(m, probes) for m in many], 1))


def test_loo_examples(rng):
    x = np.linspace(0, 1, 5)[:, None]
    y = 2 * x[:, 0] + 1
    # shape of the order of the domain; the nearest-neighbour default is rougher here
    errs = [_oracle_predict(np.delete(x, i, 0), np.delete(y, i), 1.0, x[i : i + 1])[0] - y[i] for i in range(5)]
    assert loo_error(x, y, shape_c=1.0) == pytest.approx(np.sqrt(np.mean(np.square(errs))), rel=1e-9)
    assert loo_error(x, y, shape_c=1.0) < 0.05 * 2.0
    assert loo_error(x, y) < 0.10 * 2.0
    xs = rng.random((8, 2))
    assert loo_error(xs, np.full(8, 4.0)) <= 1e-8
    noise = np.random.default_rng(99).normal(size=30)
    xn = np.random.default_rng(98).random((30, 2))
    assert loo_error(xn, noise) <= 2 * noise.std()
    with pytest.raises(ValueError):
        loo_error(x[:2], [0, 1])


def test_closed_form_loo_matches_refit(rng):
    x = rng.random((14, 2))
    y = np.exp(x[:, 0]) - x[:, 1]
    c = 0.4
    m = fit_rbf(x, y, shape_c=c)
    assert m.fit_stats["loo_rms"] == pytest.approx(loo_error(x, y, shape_c=c), rel=1e-6)


def test_interpolation_stat_and_roundtrip(rng):
    x = rng.random((20, 5))
    y = np.sum(x**2, 1)
    m = fit_rbf(x, y)
    assert m.fit_stats["max_residual"] <= 1e-8
    clone = RBFModel.from_dict(m.to_dict())
    assert np.array_equal(predict(clone, x), predict(m, x))


def test_model_invariants():
    with pytest.raises(ValueError):
        RBFModel(np.zeros((2, 1)), np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        RBFModel(np.zeros((2, 1)), np.zeros(2), 0.0)


def test_deterministic(rng):
    x = rng.random((10, 2))
    y = x[:, 0] - x[:, 1]
    assert np.array_equal(fit_rbf(x, y).weights, fit_rbf(x, y).weights)
