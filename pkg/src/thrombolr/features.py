"""Model input descriptions (base, squared, shifted log, interaction),
column screening and materialization."""

import fnmatch
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError, DegenerateDataError, FeatureDomainError

KINDS = ("Base", "SQ", "LOG", "IX")
_KIND_ORDER = {k: i for i, k in enumerate(KINDS)}

LOG_EPSILON = 1e-6


@dataclass(frozen=True)
class FeatureSpec:
    kind: str
    name_a: str
    name_b: Optional[str] = None
    shift: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.kind == "IX":
            if self.name_b is None or self.name_b == self.name_a:
                raise ValueError("IX needs two distinct operands")
            if self.name_b < self.name_a:
                a, b = self.name_b, self.name_a
                object.__setattr__(self, "name_a", a)
                object.__setattr__(self, "name_b", b)
        elif self.name_b is not None:
            raise ValueError(f"{self.kind} takes a single operand")
        if self.kind == "LOG":
            if self.shift is None or not math.isfinite(self.shift):
                raise ValueError("LOG needs a finite shift")
            object.__setattr__(self, "shift", float(self.shift))
        elif self.shift is not None:
            raise ValueError(f"{self.kind} takes no shift")

    @classmethod
    def base(cls, name):
        return cls("Base", name)

    @classmethod
    def sq(cls, name):
        return cls("SQ", name)

    @classmethod
    def log(cls, name, shift):
        return cls("LOG", name, shift=shift)

    @classmethod
    def ix(cls, a, b):
        return cls("IX", a, b)

    @property
    def name(self):
        if self.kind == "Base":
            return self.name_a
        if self.kind == "IX":
            return f"IX({self.name_a},{self.name_b})"
        return f"{self.kind}({self.name_a})"

    @property
    def base_names(self):
        return (self.name_a,) if self.name_b is None else (self.name_a, self.name_b)

    def sort_key(self):
        return (_KIND_ORDER[self.kind], self.name_a, self.name_b or "")

    def apply(self, a, b=None):
        """Transform raw operand values."""
        if self.kind == "Base":
            return a.copy()
        if self.kind == "SQ":
            return a * a
        if self.kind == "LOG":
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.log(a + self.shift)
        return a * b

    def to_dict(self):
        out = {"kind": self.kind, "name_a": self.name_a}
        if self.name_b is not None:
            out["name_b"] = self.name_b
        if self.shift is not None:
            out["shift"] = self.shift
        return out

    @classmethod
    def from_dict(cls, data):
        return cls(data["kind"], data["name_a"], data.get("name_b"), data.get("shift"))

    def __str__(self):
        return self.name


def materialize(table, specs, rows=None, check_finite=False):
    """Raw (pre-standardization) matrix with one column per spec, in spec order."""
    specs = list(specs)
    n = table.n_rows if rows is None else len(rows)
    out = np.empty((n, len(specs)))
    cache = {}

    def col(name):
        if name not in cache:
            if name not in table.columns:
                raise DataError(f"missing base column {name!r}")
            v = table.columns[name]
            cache[name] = v if rows is None else v[rows]
        return cache[name]

    for j, spec in enumerate(specs):
        out[:, j] = spec.apply(*(col(nm) for nm in spec.base_names))
    if check_finite:
        bad = ~np.isfinite(out)
        if bad.any():
            counts = {specs[j].name: int(c) for j, c in enumerate(bad.sum(axis=0)) if c}
            raise FeatureDomainError(f"non-finite feature values (rows per spec): {counts}", counts)
    return out


def log_shift(values, epsilon=LOG_EPSILON):
    """Shift ``c`` making ``values + c`` strictly positive: eps * range + max(0, -min)."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    c = epsilon * (hi - lo) + max(0.0, -lo)
    if c == 0.0:
        c = epsilon * max(abs(lo), 1.0)
    while not lo + c > 0:
        c = np.nextafter(c, math.inf)
    return float(c)


def engineer_features(base_names, table, rows=None, epsilon=LOG_EPSILON):
    """SQ and LOG for every base feature plus all canonical pairwise IX terms.

    Emits ``2k + k(k-1)/2`` specs. LOG shifts are computed on ``rows``
    (the training rows) only.
    """
    base_names = list(base_names)
    if not base_names:
        raise ValueError("need at least one base feature")
    if len(set(base_names)) != len(base_names):
        raise ValueError("base feature names must be unique")
    sq = [FeatureSpec.sq(nm) for nm in base_names]
    logs = []
    for nm in base_names:
        v = table.columns[nm] if rows is None else table.columns[nm][rows]
        logs.append(FeatureSpec.log(nm, log_shift(v, epsilon)))
    pairs = sorted(
        (FeatureSpec.ix(base_names[i], base_names[j])
         for i in range(len(base_names)) for j in range(i + 1, len(base_names))),
        key=FeatureSpec.sort_key,
    )
    return sq + logs + pairs


def candidate_specs(base_names, table, rows=None, include_base=True, epsilon=LOG_EPSILON):
    base = [FeatureSpec.base(nm) for nm in base_names] if include_base else []
    return base + engineer_features(base_names, table, rows, epsilon)


@dataclass(frozen=True)
class ScreenConfig:
    exclusion_patterns: tuple = ("Coordinate*",)
    constant_tolerance: float = 1e-12
    correlation_threshold: float = 0.95
    importance_cutoff: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "exclusion_patterns", tuple(self.exclusion_patterns))
        if not 0 < self.importance_cutoff < 1:
            raise ValueError("importance_cutoff must lie in (0, 1)")
        if not 0 < self.correlation_threshold <= 1:
            raise ValueError("correlation_threshold must lie in (0, 1]")
        if self.constant_tolerance < 0:
            raise ValueError("constant_tolerance must be >= 0")


@dataclass(frozen=True)
class ScreenResult:
    retained: list
    removed: list  # (name, reason, detail)

    def report_rows(self):
        return [(name, reason, detail) for name, reason, detail in self.removed]


def _column_stats(table, names, rows, chunk=200_000):
    n = table.n_rows if rows is None else len(rows)
    means = np.array([np.mean(table.columns[nm] if rows is None else table.columns[nm][rows])
                      for nm in names])
    gram = np.zeros((len(names), len(names)))
    for start in range(0, n, chunk):
        idx = np.arange(start, min(start + chunk, n)) if rows is None else rows[start:start + chunk]
        block = table.matrix(names, idx) - means
        gram += block.T @ block
    return means, gram / n


def screen_columns(table, config=None, rows=None):
    """Drop pattern-excluded, constant and highly correlated columns.

    Statistics come from ``rows`` (training rows). Among a correlated pair
    the column with the larger variance is kept, ties broken by name.
    """
    config = config or ScreenConfig()
    rows = None if rows is None else np.asarray(rows, dtype=np.intp)
    removed = []
    names = []
    for nm in table.column_names:
        pat = next((p for p in config.exclusion_patterns if fnmatch.fnmatchcase(nm, p)), None)
        if pat is not None:
            removed.append((nm, "excluded-pattern", pat))
        else:
            names.append(nm)

    variances = {}
    survivors = []
    for nm in names:
        v = table.columns[nm] if rows is None else table.columns[nm][rows]
        var = float(np.var(v)) if v.size else 0.0
        if var <= config.constant_tolerance:
            removed.append((nm, "constant", f"variance={var!r}"))
        else:
            variances[nm] = var
            survivors.append(nm)

    if survivors:
        _, cov = _column_stats(table, survivors, rows)
        sd = np.sqrt(np.diag(cov))
        corr = cov / np.outer(sd, sd)
        pos = {nm: i for i, nm in enumerate(survivors)}
        priority = sorted(survivors, key=lambda nm: (-variances[nm], nm))
        kept = []
        dropped = set()
        for nm in priority:
            partner = next((k for k in kept
                            if abs(corr[pos[nm], pos[k]]) >= config.correlation_threshold), None)
            if partner is None:
                kept.append(nm)
            else:
                r = float(corr[pos[nm], pos[partner]])
                removed.append((nm, "correlated", f"r={r!r} with {partner}"))
                dropped.add(nm)
        survivors = [nm for nm in survivors if nm not in dropped]

    if not survivors:
        raise DegenerateDataError("column screening removed every feature")
    return ScreenResult(retained=survivors, removed=removed)
