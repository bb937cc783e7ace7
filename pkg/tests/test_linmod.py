import numpy as np
import pytest
from scipy.optimize import minimize

from thrombolr.errors import ConvergenceError, DataError, DegenerateDataError
from thrombolr.linmod import (LogisticObjective, Standardizer, TrainConfig, class_weights,
                              coefficient_importance, fit_logistic, sample_weights, sigmoid)


def random_instance(rng):
    n = int(rng.integers(20, 501))
    d = int(rng.integers(1, 4))
    X = rng.normal(size=(n, d))
    beta = rng.normal(scale=2.0, size=d)
    y = (rng.random(n) < sigmoid(X @ beta - 1.0)).astype(int)
    y[:2] = [0, 1]
    lam = float(rng.choice([0.1, 1.0, 10.0]))
    return X, y, lam


def brute_force_minimum(obj, width=6.0, points=9):
    """Coarse grid over theta, then Powell polish from the best cell."""
    k = obj.n_params
    axes = [np.linspace(-width, width, points)] * k
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
    start = grid[np.argmin([obj.value(t) for t in grid])]
    best = None
    for _ in range(4):
        # derivative-free polish; never consults the analytic gradient
        res = minimize(obj.value, start, method="Powell",
                       options={"xtol": 1e-12, "ftol": 1e-15, "maxfev": 50_000})
        if best is not None and best.fun - res.fun < 1e-15:
            break
        best, start = res, res.x
    return best.fun


def test_sigmoid_stable():
    z = np.array([-1000.0, -30.0, 0.0, 30.0, 1000.0])
    p = sigmoid(z)
    assert np.all(np.isfinite(p))
    assert p[2] == 0.5
    assert p[0] == 0.0 and p[-1] == 1.0


def test_class_weight_ratio_at_two_percent():
    y = np.r_[np.ones(20), np.zeros(980)]
    w_pos, w_neg = class_weights(y)
    assert w_pos / w_neg == 49.0
    w = sample_weights(y)
    assert w[y == 1].sum() == pytest.approx(500.0, abs=1e-9)
    assert w[y == 0].sum() == pytest.approx(500.0, abs=1e-9)
    with pytest.raises(DegenerateDataError):
        class_weights(np.zeros(10))


def test_gradient_matches_central_differences(rng):
    for _ in range(10):
        X, y, lam = random_instance(rng)
        obj = LogisticObjective(X, y, sample_weights(y), lam)
        theta = rng.normal(size=obj.n_params)
        g = obj.gradient(theta)
        h = 1e-6
        fd = np.array([(obj.value(theta + h * e) - obj.value(theta - h * e)) / (2 * h)
                       for e in np.eye(obj.n_params)])
        assert np.allclose(g, fd, rtol=1e-5, atol=1e-6 * max(1.0, np.abs(g).max()))


def test_hessian_matches_gradient_differences(rng):
    X, y, lam = random_instance(rng)
    obj = LogisticObjective(X, y, sample_weights(y), lam)
    theta = rng.normal(size=obj.n_params) * 0.3
    H = obj.hessian(theta)
    h = 1e-6
    fd = np.column_stack([(obj.gradient(theta + h * e) - obj.gradient(theta - h * e)) / (2 * h)
                          for e in np.eye(obj.n_params)])
    assert np.allclose(H, fd, rtol=1e-5, atol=1e-5)


def test_fit_matches_brute_force(rng):
    for _ in range(5):
        X, y, lam = random_instance(rng)
        fit = fit_logistic(X, y, TrainConfig(l2_strength=lam))
        obj = LogisticObjective(X, y, sample_weights(y), lam)
        assert fit.grad_norm <= 1e-8
        assert fit.objective == pytest.approx(obj.value(fit.theta), abs=1e-12)
        assert fit.objective <= brute_force_minimum(obj) + 1e-8


def test_intercept_is_not_penalized():
    # one constant-free feature with no signal: intercept recovers the weighted log-odds (0)
    y = np.r_[np.ones(10), np.zeros(90)]
    X = np.zeros((100, 1))
    fit = fit_logistic(X, y, TrainConfig(l2_strength=1e6))
    assert fit.intercept == pytest.approx(0.0, abs=1e-10)
    fit = fit_logistic(X, y, TrainConfig(class_weighting="none"))
    assert fit.intercept == pytest.approx(np.log(10 / 90), abs=1e-8)


def test_separable_data_converges_with_ridge():
    X = np.r_[np.linspace(-3, -1, 50), np.linspace(1, 3, 50)][:, None]
    y = np.r_[np.zeros(50), np.ones(50)]
    fit = fit_logistic(X, y)
    assert fit.grad_norm <= 1e-8
    assert fit.coef[0] > 0


def test_iteration_budget_raises():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 3))
    y = (X[:, 0] > 0).astype(int)
    with pytest.raises(ConvergenceError) as err:
        fit_logistic(X, y, TrainConfig(max_iterations=1, l2_strength=1e-3))
    assert err.value.grad_norm > 1e-8


def test_fit_input_errors():
    with pytest.raises(DataError):
        fit_logistic(np.ones((3, 1)), [0, 1])
    with pytest.raises(DataError):
        fit_logistic(np.array([[np.nan], [1.0]]), [0, 1])
    with pytest.raises(DegenerateDataError):
        fit_logistic(np.ones((3, 1)), [1, 1, 1])


def test_standardizer(rng):
    X = rng.normal(loc=3.0, scale=2.0, size=(500, 3))
    sc = Standardizer().fit(X)
    Z = sc.transform(X)
    assert np.allclose(Z.mean(axis=0), 0, atol=1e-12)
    assert np.allclose(Z.std(axis=0), 1, atol=1e-12)
    assert sc.get_params() == {}
    with pytest.raises(DegenerateDataError):
        Standardizer().fit(np.ones((5, 1)))


def test_coefficient_importance():
    imp = coefficient_importance(np.array([3.0, -1.0]))
    assert imp.tolist() == [0.75, 0.25]
    with pytest.raises(DataError):
        coefficient_importance(np.zeros(2))
