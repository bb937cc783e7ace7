import numpy as np
import pytest

from thrombolr.dataset import FeatureTable
from thrombolr.errors import DegenerateDataError, FeatureDomainError
from thrombolr.features import (FeatureSpec, ScreenConfig, candidate_specs,
                                engineer_features, log_shift, materialize, screen_columns)


def test_spec_names_and_canonical_ix():
    assert FeatureSpec.base("u").name == "u"
    assert FeatureSpec.sq("u").name == "SQ(u)"
    assert FeatureSpec.log("u", 0.5).name == "LOG(u)"
    assert FeatureSpec.ix("v", "u") == FeatureSpec.ix("u", "v")
    assert FeatureSpec.ix("v", "u").name == "IX(u,v)"
    with pytest.raises(ValueError):
        FeatureSpec.ix("u", "u")
    with pytest.raises(ValueError):
        FeatureSpec("LOG", "u")


def test_spec_dict_roundtrip():
    for spec in (FeatureSpec.base("a"), FeatureSpec.sq("a"), FeatureSpec.log("a", 0.1 + 0.2),
                 FeatureSpec.ix("a", "b")):
        assert FeatureSpec.from_dict(spec.to_dict()) == spec


def test_materialize_values():
    t = FeatureTable({"a": [1.0, 2.0, 3.0], "b": [0.5, -1.0, 2.0]})
    specs = [FeatureSpec.base("a"), FeatureSpec.sq("b"), FeatureSpec.log("a", 0.5),
             FeatureSpec.ix("a", "b")]
    M = materialize(t, specs)
    assert M[:, 0].tolist() == [1.0, 2.0, 3.0]
    assert M[:, 1].tolist() == [0.25, 1.0, 4.0]
    assert M[:, 2].tolist() == np.log([1.5, 2.5, 3.5]).tolist()
    assert M[:, 3].tolist() == [0.5, -2.0, 6.0]
    assert materialize(t, specs, rows=np.array([2])).tolist() == [M[2].tolist()]


def test_log_domain_error_counts():
    t = FeatureTable({"a": [-2.0, -1.0, 3.0]})
    with pytest.raises(FeatureDomainError) as err:
        materialize(t, [FeatureSpec.log("a", 0.5)], check_finite=True)
    assert err.value.counts == {"LOG(a)": 2}


def test_log_shift_positive():
    for vals in ([0.0, 1.0], [-3.0, 5.0], [1e-300, 2e-300], [7.0, 7.0], [-1e16, 1.0]):
        c = log_shift(vals)
        assert min(vals) + c > 0
    assert log_shift([-3.0, 5.0]) == pytest.approx(3.0 + 8e-6)


def test_engineer_count_and_order():
    names = [f"f{i}" for i in range(14)]
    t = FeatureTable({nm: np.arange(5.0) + i for i, nm in enumerate(names)})
    specs = engineer_features(names, t)
    assert len(specs) == 2 * 14 + 14 * 13 // 2 == 119
    assert len(candidate_specs(names, t)) == 133
    kinds = [s.kind for s in specs]
    assert kinds == ["SQ"] * 14 + ["LOG"] * 14 + ["IX"] * 91
    assert len({s.name for s in specs}) == 119


def test_screen_pipeline():
    rng = np.random.default_rng(0)
    a = rng.normal(size=1000)
    cols = {
        "CoordinateX": rng.normal(size=1000),
        "a": a,
        "a_copy": a * 0.5 + 1e-9 * rng.normal(size=1000),
        "const": np.full(1000, 3.0),
        "b": rng.normal(size=1000),
    }
    res = screen_columns(FeatureTable(cols), ScreenConfig())
    assert res.retained == ["a", "b"]
    reasons = {nm: why for nm, why, _ in res.removed}
    assert reasons == {"CoordinateX": "excluded-pattern", "const": "constant",
                       "a_copy": "correlated"}


def test_screen_uses_only_given_rows():
    t = FeatureTable({"a": [1.0, 1.0, 1.0, 5.0], "b": [0.0, 1.0, 2.0, 2.0]})
    res = screen_columns(t, rows=np.array([0, 1, 2]))
    assert [nm for nm, why, _ in res.removed] == ["a"]


def test_screen_everything_removed():
    with pytest.raises(DegenerateDataError):
        screen_columns(FeatureTable({"c": np.ones(10)}))


def test_engineer_small_cases():
    t = FeatureTable({"a": [1.0, 2.0], "b": [3.0, 5.0]})
    assert [s.name for s in engineer_features(["a"], t)] == ["SQ(a)", "LOG(a)"]
    assert [s.name for s in engineer_features(["a", "b"], t)] == [
        "SQ(a)", "SQ(b)", "LOG(a)", "LOG(b)", "IX(a,b)"]


def test_spec_transforms_examples():
    t = FeatureTable({"a": [2.0, -2.0, 0.0], "b": [3.0, 1.0, 1.0]})
    assert materialize(t, [FeatureSpec.ix("a", "b")])[0, 0] == 6.0
    assert materialize(t, [FeatureSpec.sq("a")])[1, 0] == 4.0
    assert materialize(t, [FeatureSpec.log("a", 1.0)])[2, 0] == 0.0


def test_screen_perfect_correlation_and_idempotence():
    rng = np.random.default_rng(3)
    x = rng.normal(size=500)
    t = FeatureTable({"x": x, "x2": 2 * x, "z": rng.normal(size=500)})
    first = screen_columns(t)
    assert first.retained == ["x2", "z"]
    again = screen_columns(FeatureTable({nm: t[nm] for nm in first.retained}))
    assert again.retained == first.retained and again.removed == []
