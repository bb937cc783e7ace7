import numpy as np
import pytest

from thrombolr.dataset import FeatureTable
from thrombolr.errors import DataError, DegenerateDataError
from thrombolr.features import FeatureSpec
from thrombolr.linmod import (LogisticModel, LogisticObjective, Standardizer, TrainConfig,
                              fit_logistic, sample_weights)
from thrombolr.metrics import pr_auc
from thrombolr.selection import (RfeConfig, importance_screen, lofo_importances,
                                 permutation_importance, refit_without_each, rfe_loop,
                                 stratified_folds, train_model)


def planted_table(n=6000, seed=0, extra=None):
    rng = np.random.default_rng(seed)
    cols = {f"x{j}": rng.normal(size=n) for j in range(1, 6)}
    z = 2.0 * cols["x1"] - 1.5 * cols["x2"] + 0.5 * cols["x3"] - 3.0
    y = (rng.random(n) < 1 / (1 + np.exp(-z))).astype(int)
    cols.update(extra(cols, rng) if extra else {})
    return FeatureTable(cols, y)


def test_folds_are_stratified_and_seeded():
    y = np.r_[np.ones(23), np.zeros(477)].astype(int)
    f = stratified_folds(y, 5, seed=1)
    for k in range(5):
        assert y[f == k].sum() in (4, 5)
        assert (f == k).sum() in (100, 101, 99)
    assert np.array_equal(f, stratified_folds(y, 5, seed=1))
    with pytest.raises(DegenerateDataError):
        stratified_folds(np.r_[np.ones(3), np.zeros(50)].astype(int), 5)


def test_batched_refit_matches_independent_fits():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(3000, 6))
    X[:, 5] = X[:, 0] + 0.1 * rng.normal(size=3000)
    y = (rng.random(3000) < 1 / (1 + np.exp(-(3 * X[:, 0] - 2 * X[:, 1] - 4)))).astype(int)
    cfg = TrainConfig()
    w = sample_weights(y)
    fit = fit_logistic(X, y, cfg)
    obj = LogisticObjective(X, y, w, cfg.l2_strength)
    out = refit_without_each(obj, fit.theta, cfg)
    for j in range(6):
        ref = fit_logistic(np.delete(X, j, axis=1), y, cfg).theta
        keep = np.r_[0, np.delete(np.arange(1, 7), j)]
        assert out[j + 1, j] == 0.0
        assert np.allclose(out[keep, j], ref, atol=1e-7)
    step = refit_without_each(obj, fit.theta, cfg, exact=False)
    for j in range(6):
        assert step[j + 1, j] == 0.0
        assert obj.value(step[:, j]) >= obj.value(out[:, j]) - 1e-9


def test_lofo_signs():
    res = lofo_importances([FeatureSpec.base(f"x{j}") for j in range(1, 6)], planted_table(),
                           folds=5, seed=0)
    assert res.deltas["x1"] > 0.05
    assert res.deltas["x2"] > 0.05
    assert abs(res.deltas["x4"]) < 0.01
    assert abs(res.deltas["x5"]) < 0.01


def test_lofo_duplicate_columns_near_zero():
    table = planted_table(extra=lambda c, rng: {"x1_dup": c["x1"].copy()})
    specs = [FeatureSpec.base(nm) for nm in ("x1", "x1_dup", "x2", "x3")]
    res = lofo_importances(specs, table)
    assert abs(res.deltas["x1"]) <= 0.005
    assert abs(res.deltas["x1_dup"]) <= 0.005


def test_lofo_needs_two_specs():
    with pytest.raises(DataError):
        lofo_importances([FeatureSpec.base("x1")], planted_table(n=1000))


def test_importance_screen_cutoff():
    res = importance_screen(planted_table(), None, [f"x{j}" for j in range(1, 6)],
                            cutoff=0.05)
    assert sum(res.importances.values()) == pytest.approx(1.0, abs=1e-12)
    assert {"x1", "x2", "x3"} <= set(res.kept)
    assert res.kept == [nm for nm, v in res.importances.items() if v >= 0.05]


def test_rfe_keeps_signal_and_records_trace(tmp_path):
    table = planted_table()
    specs = [FeatureSpec.base(f"x{j}") for j in range(1, 6)]
    res = rfe_loop(specs, table, config=RfeConfig(seed=0))
    names = {s.name for s in res.selected}
    assert {"x1", "x2"} <= names
    tr = res.trace
    assert tr.iterations[tr.best_iteration].baseline == tr.best_pr_auc
    assert len(tr.iterations[0].retained) == 5
    assert all(r.eliminated for r in tr.iterations[:-1])
    tr.to_csv(tmp_path / "trace.csv")
    head = (tmp_path / "trace.csv").read_text().splitlines()[0]
    assert head == "iteration,n_retained,eliminated,baseline_pr_auc,smoothed_delta"


def test_rfe_smoothing_is_trailing_mean():
    table = planted_table(n=3000)
    specs = [FeatureSpec.base(f"x{j}") for j in range(1, 6)]
    res = rfe_loop(specs, table, config=RfeConfig(smoothing_window=2, decline_patience=10))
    its = res.trace.iterations
    for k in range(1, len(its)):
        for nm in its[k].retained:
            prev = its[k - 1].raw[nm]
            assert its[k].smoothed[nm] == pytest.approx((prev + its[k].raw[nm]) / 2)


def test_rfe_stops_on_consistent_decline():
    table = planted_table()
    specs = [FeatureSpec.base(f"x{j}") for j in range(1, 6)]
    res = rfe_loop(specs, table, config=RfeConfig(decline_patience=1))
    last = res.trace.iterations[-1]
    best = res.trace.best_pr_auc
    assert last.eliminated is None
    assert len(last.retained) == 2 or last.baseline < best * (1 - 0.005)


def test_rfe_deterministic():
    table = planted_table(n=3000)
    specs = [FeatureSpec.base(f"x{j}") for j in range(1, 6)]
    a = rfe_loop(specs, table, config=RfeConfig(seed=3))
    b = rfe_loop(specs, table, config=RfeConfig(seed=3))
    assert [r.raw for r in a.trace.iterations] == [r.raw for r in b.trace.iterations]


def test_permutation_importance_invariants():
    table = planted_table(extra=lambda c, rng: {"const": np.full(c["x1"].size, 2.0)})
    rows = np.arange(4000)
    val = np.arange(4000, 6000)
    model = train_model(table, rows, [FeatureSpec.base(nm) for nm in ("x1", "x2", "x4")])
    res = permutation_importance(model, table, val, repeats=5, seed=0)
    drops = dict(zip(res.names, res.mean_drop))
    assert drops["x1"] > 0.1
    assert abs(drops["x4"]) <= 0.01
    assert res.baseline == pytest.approx(pr_auc(model.predict_proba(table.take(val)),
                                                table.label[val]))
    # a constant input cannot change any score when shuffled
    with_const = LogisticModel(model.intercept, np.r_[model.coefficients, 0.7],
                               model.feature_specs + (FeatureSpec.base("const"),),
                               Standardizer.from_params(np.r_[model.standardizer.means_, 0.0],
                                                        np.r_[model.standardizer.stds_, 1.0],
                                                        4000))
    res = permutation_importance(with_const, table, val, repeats=5, seed=0)
    assert res.mean_drop[-1] == 0.0
    assert np.all(res.std_drop[-1] == 0.0)


def test_importance_dominant_feature_dropped():
    from thrombolr.linmod import coefficient_importance
    imp = coefficient_importance(np.array([10.0, 0.01]))
    assert imp[0] == pytest.approx(0.999, abs=1e-3)
    assert imp[1] < 0.01


def test_lofo_only_interaction_informative():
    rng = np.random.default_rng(11)
    n = 20_000
    cols = {f"x{j}": rng.lognormal(sigma=0.5, size=n) for j in range(1, 5)}
    z = cols["x1"] * cols["x2"]
    y = (z > np.quantile(z, 0.98)).astype(int)
    table = FeatureTable(cols, y)
    specs = [FeatureSpec.ix("x1", "x2"), FeatureSpec.base("x3"), FeatureSpec.base("x4"),
             FeatureSpec.sq("x3")]
    res = lofo_importances(specs, table)
    assert res.deltas["IX(x1,x2)"] > 0.1
    assert all(abs(res.deltas[s.name]) < 0.02 for s in specs[1:])


def test_rfe_two_specs_floor():
    table = planted_table(n=2000)
    res = rfe_loop([FeatureSpec.base("x1"), FeatureSpec.base("x2")], table)
    assert len(res.trace.iterations) == 1
    assert [s.name for s in res.selected] == ["x1", "x2"]


def test_row_order_invariance():
    table = planted_table(n=3000)
    specs = [FeatureSpec.base(f"x{j}") for j in range(1, 5)]
    rows = np.arange(3000)
    shuffled = np.random.default_rng(0).permutation(rows)
    a = lofo_importances(specs, table, rows, seed=2)
    b = lofo_importances(specs, table, shuffled, seed=2)
    assert a.deltas == b.deltas and a.baseline == b.baseline


def test_duplicate_spec_barely_moves_best_score():
    base = planted_table(n=4000)
    dup = planted_table(n=4000, extra=lambda c, rng: {"x1_dup": c["x1"].copy()})
    specs = [FeatureSpec.base(f"x{j}") for j in range(1, 5)]
    a = rfe_loop(specs, base).trace.best_pr_auc
    b = rfe_loop(specs + [FeatureSpec.base("x1_dup")], dup).trace.best_pr_auc
    assert abs(a - b) <= 0.01
