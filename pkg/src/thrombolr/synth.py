"""Synthetic feature tables with planted nonlinear ground truth."""

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._io import write_json
from .dataset import FeatureTable, write_csv_table
from .errors import DataError
from .features import FeatureSpec, materialize
from .linmod import sigmoid

LABEL_MODES = ("quantile", "bernoulli")
DISTRIBUTIONS = ("normal", "lognormal")
_MAX_REDRAWS = 50


@dataclass(frozen=True)
class PlantedTruth:
    specs: tuple
    coefficients: tuple
    intercept: float = 0.0
    prevalence: float = 0.02
    mode: str = "quantile"
    distribution: str = "normal"
    sigma: float = 1.0
    noise_columns: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        object.__setattr__(self, "noise_columns", tuple(self.noise_columns))
        if len(self.specs) != len(self.coefficients):
            raise ValueError("one coefficient per planted spec")
        if not 0 < self.prevalence < 0.5:
            raise ValueError("prevalence must lie in (0, 0.5)")
        if self.mode not in LABEL_MODES:
            raise ValueError(f"mode must be one of {LABEL_MODES}")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"distribution must be one of {DISTRIBUTIONS}")
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")

    @property
    def referenced_columns(self):
        return sorted({nm for s in self.specs for nm in s.base_names}, key=_column_order)

    def to_dict(self):
        return {
            "specs": [s.to_dict() for s in self.specs],
            "coefficients": list(self.coefficients),
            "intercept": self.intercept,
            "prevalence": self.prevalence,
            "mode": self.mode,
            "distribution": self.distribution,
            "sigma": self.sigma,
            "noise_columns": list(self.noise_columns),
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["specs"] = tuple(FeatureSpec.from_dict(s) for s in data["specs"])
        return cls(**data)


def default_truth(**overrides):
    """IX(x1,x2) with +2.0 and SQ(x3) with +1.5 at 2% prevalence."""
    params = dict(specs=(FeatureSpec.ix("x1", "x2"), FeatureSpec.sq("x3")),
                  coefficients=(2.0, 1.5))
    params.update(overrides)
    return PlantedTruth(**params)


def _column_order(name):
    return (len(name), name)


def _draw(truth, rng, n):
    if truth.distribution == "lognormal":
        return rng.lognormal(0.0, truth.sigma, n)
    return rng.standard_normal(n)


def _point_biserial(x, y):
    x = x - x.mean()
    yc = y - y.mean()
    return float((x @ yc) / math.sqrt((x @ x) * (yc @ yc)))


def generate(truth, n, d, seed):
    """Draw ``d`` base columns ``x1..xd`` and planted labels.

    Every column gets its own seed derived from ``(seed, column)``, so the
    output is a pure function of the arguments. Noise columns whose
    point-biserial correlation with the labels exceeds ``3 / sqrt(n)`` are
    redrawn. Returns ``(table, truth)`` with ``truth.noise_columns`` filled.
    """
    if n < 1000:
        raise DataError("n must be at least 1000")
    names = [f"x{j + 1}" for j in range(d)]
    missing = [nm for nm in truth.referenced_columns if nm not in names]
    if missing:
        raise DataError(f"truth references columns beyond d={d}: {missing}")
    columns = {nm: _draw(truth, np.random.default_rng([seed, 0, j]), n)
               for j, nm in enumerate(names)}

    z = np.full(n, float(truth.intercept))
    if truth.specs:
        raw = materialize(FeatureTable(columns), truth.specs, check_finite=True)
        z += raw @ np.asarray(truth.coefficients)
    if truth.mode == "quantile":
        n_pos = int(math.floor(truth.prevalence * n + 0.5))
        order = np.argsort(-z, kind="stable")
        if 0 < n_pos < n and z[order[n_pos - 1]] == z[order[n_pos]]:
            raise DataError("quantile labelling is ambiguous: tied scores at the cutoff")
        y = np.zeros(n, dtype=np.int8)
        y[order[:n_pos]] = 1
    else:
        u = np.random.default_rng([seed, 1]).random(n)
        y = (u < sigmoid(z)).astype(np.int8)

    used = set(truth.referenced_columns)
    noise = [nm for nm in names if nm not in used]
    limit = 3.0 / math.sqrt(n)
    if 0 < y.sum() < n:
        yf = y.astype(np.float64)
        for nm in noise:
            j = names.index(nm)
            attempt = 0
            while abs(_point_biserial(columns[nm], yf)) > limit:
                attempt += 1
                if attempt > _MAX_REDRAWS:
                    raise DataError(f"could not draw an independent noise column {nm}")
                columns[nm] = _draw(truth, np.random.default_rng([seed, 0, j, attempt]), n)
    return FeatureTable(columns, y), replace(truth, noise_columns=tuple(noise))


def write_synth(directory, table, truth, label_column="Thrombus"):
    directory = Path(directory)
    write_csv_table(directory / "data.csv", table, label_column)
    write_json(directory / "truth.json", truth.to_dict())


def read_truth(path):
    return PlantedTruth.from_dict(json.loads(Path(path).read_text()))
