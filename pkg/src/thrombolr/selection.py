"""Coefficient screening, leave-one-feature-out elimination and
permutation importance."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.special import expit

from ._io import write_csv
from .errors import DataError, DegenerateDataError
from .features import FeatureSpec, materialize
from .linmod import (LogisticModel, LogisticObjective, Standardizer, TrainConfig,
                     coefficient_importance, fit_logistic, sample_weights, sigmoid)
from .metrics import pr_auc, pr_auc_columns

REFIT_MODES = ("exact", "newton-step")


def _sorted_rows(table, rows):
    if rows is None:
        return np.arange(table.n_rows)
    rows = np.unique(np.asarray(rows, dtype=np.int64))
    return rows


def _labels(table, rows):
    if table.label is None:
        raise DataError("table has no label column")
    return table.label[rows].astype(np.float64)


def train_model(table, rows, specs, config=None):
    """Fit a class-balanced model on ``rows`` over ``specs``.

    The standardizer is fitted on the same rows, so callers pass training
    rows only.
    """
    config = config or TrainConfig()
    rows = _sorted_rows(table, rows)
    specs = list(specs)
    raw = materialize(table, specs, rows, check_finite=True)
    scaler = Standardizer().fit(raw)
    fit = fit_logistic(scaler.transform(raw), _labels(table, rows), config)
    return LogisticModel(fit.intercept, fit.coef, tuple(specs), scaler,
                         fit_info={"n_iter": fit.n_iter, "grad_norm": fit.grad_norm,
                                   "objective": fit.objective})


@dataclass(frozen=True)
class ImportanceScreenResult:
    kept: list
    importances: dict
    model: LogisticModel


def importance_screen(table, rows, names, cutoff=0.01, config=None):
    """Keep base columns whose normalized |coefficient| is at least ``cutoff``."""
    names = list(names)
    if len(names) < 2:
        raise DataError("importance screening needs at least two columns")
    model = train_model(table, rows, [FeatureSpec.base(nm) for nm in names], config)
    imp = coefficient_importance(model)
    importances = dict(zip(names, imp.tolist()))
    kept = [nm for nm, v in importances.items() if v >= cutoff]
    if not kept:
        raise DegenerateDataError(f"every normalized importance is below {cutoff}")
    return ImportanceScreenResult(kept, importances, model)


def stratified_folds(labels, n_folds=5, seed=0):
    """Fold id per row; each class is shuffled with ``seed`` and dealt round-robin."""
    y = np.asarray(labels)
    folds = np.empty(y.size, dtype=np.int64)
    rng = np.random.default_rng(seed)
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        perm = idx[rng.permutation(idx.size)]
        folds[perm] = np.arange(idx.size) % n_folds
    for f in range(n_folds):
        yf = y[folds == f]
        if yf.size == 0 or yf.min() == yf.max():
            raise DegenerateDataError(f"fold {f} does not contain both classes")
    return folds


@dataclass(frozen=True)
class RfeConfig:
    folds: int = 5
    smoothing_window: int = 5
    decline_tolerance: float = 0.005
    decline_patience: int = 3
    min_features: int = 2
    refit: str = "exact"
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.smoothing_window < 1 or self.decline_patience < 1:
            raise ValueError("smoothing_window and decline_patience must be >= 1")
        if self.min_features < 1:
            raise ValueError("min_features must be >= 1")
        if self.refit not in REFIT_MODES:
            raise ValueError(f"refit must be one of {REFIT_MODES}")


class _CrossValidator:
    """Fold-local standardized design matrices over a fixed candidate set."""

    def __init__(self, table, rows, specs, n_folds, seed, train_config):
        self.specs = list(specs)
        names = [s.name for s in self.specs]
        if len(set(names)) != len(names):
            raise DataError("duplicate feature specs")
        rows = _sorted_rows(table, rows)
        self.y = _labels(table, rows)
        self.raw = materialize(table, self.specs, rows, check_finite=True)
        self.config = train_config
        fold_id = stratified_folds(self.y, n_folds, seed)
        self.folds = []
        for f in range(n_folds):
            tr = np.flatnonzero(fold_id != f)
            va = np.flatnonzero(fold_id == f)
            mu = self.raw[tr].mean(axis=0)
            sd = self.raw[tr].std(axis=0)
            bad = [self.specs[j].name for j in np.flatnonzero(~(sd > 0))]
            if bad:
                raise DegenerateDataError(f"constant within fold {f}: {bad}")
            self.folds.append((tr, va, mu, sd))

    def design(self, f, active):
        tr, va, mu, sd = self.folds[f]
        sub = self.raw[:, active]
        return ((sub[tr] - mu[active]) / sd[active], (sub[va] - mu[active]) / sd[active],
                self.y[tr], self.y[va])

    def lofo(self, active, refit="exact", warm=None):
        """Per-fold baseline PR-AUC and PR-AUC with each active spec left out."""
        d = len(active)
        k = len(self.folds)
        base = np.empty(k)
        without = np.empty((k, d))
        thetas = []
        for f in range(k):
            Xt, Xv, yt, yv = self.design(f, active)
            w = sample_weights(yt, self.config.class_weighting)
            init = None if warm is None else warm[f]
            fit = fit_logistic(Xt, yt, self.config, sample_weight=w, init=init)
            theta = fit.theta
            thetas.append(theta)
            base[f] = pr_auc(Xv @ theta[1:] + theta[0], yv)
            if d < 2:
                without[f] = np.nan
                continue
            obj = LogisticObjective(Xt, yt, w, self.config.l2_strength)
            reduced = refit_without_each(obj, theta, self.config, exact=(refit == "exact"))
            scores = Xv @ reduced[1:] + reduced[0]
            without[f] = pr_auc_columns(scores, yv)
        return base, without, thetas


# cap on n * block elements held per batched refit sweep
_BLOCK_ELEMENTS = 1 << 24


def refit_without_each(obj, theta, config, exact=True, max_sweeps=15):
    """Parameter vectors refitted with each feature left out in turn.

    Column ``j`` of the ``(d + 1, d)`` result minimizes the objective with
    coefficient ``j`` fixed at zero. Every candidate starts with one
    constrained Newton step from ``theta``. With ``exact`` the candidates
    then iterate Newton steps through the full Hessian inverse at ``theta``,
    reduced per candidate by the Schur complement identity so a single
    matrix product serves all of them, until each gradient max-norm meets
    ``config.tolerance``; stragglers fall back to :func:`fit_logistic`.
    """
    d = theta.size - 1
    H = obj.hessian(theta)
    Hinv = linalg.inv(H, check_finite=False)
    Hinv = 0.5 * (Hinv + Hinv.T)
    # constrained Newton step from theta: minimizes the local quadratic model
    # subject to coefficient j being zero
    fixed = np.arange(1, d + 1)
    v = Hinv @ obj.gradient(theta)
    out = (theta - v)[:, None] - Hinv[:, fixed] * ((theta[fixed] - v[fixed]) / Hinv[fixed, fixed])
    out[fixed, np.arange(d)] = 0.0
    if not exact:
        return out
    n = obj.X.shape[0]
    block = max(1, min(d, _BLOCK_ELEMENTS // max(n, 1)))
    for start in range(0, d, block):
        cols = np.arange(start, min(start + block, d))
        pending = _refit_block(obj, Hinv, out, cols, config, max_sweeps)
        for j in pending:
            keep = np.r_[0, np.delete(np.arange(1, d + 1), j)]
            sub = fit_logistic(np.delete(obj.X, j, axis=1), obj.y, config,
                               sample_weight=obj.w, init=out[keep, j])
            out[keep, j] = sub.theta
    return out


def _refit_block(obj, Hinv, out, cols, config, max_sweeps):
    """Sweep candidates ``cols`` in place; return those needing a full fit.

    A candidate whose gradient grows is not contracting under the fixed
    Hessian; it is rolled back to its best iterate and handed back.
    """
    X, y, w = obj.X, obj.y, obj.w
    pending = cols
    best = np.full(cols.size, np.inf)
    best_theta = out[:, cols].copy()
    stalled = []
    for _ in range(max_sweeps):
        theta = out[:, pending]
        R = w[:, None] * (expit(X @ theta[1:] + theta[0]) - y[:, None])
        G = np.empty_like(theta)
        G[0] = R.sum(axis=0)
        G[1:] = X.T @ R + obj.lam * theta[1:]
        fixed = pending + 1
        G[fixed, np.arange(pending.size)] = 0.0
        gmax = np.abs(G).max(axis=0)
        slot = np.searchsorted(cols, pending)
        grew = gmax >= best[slot]
        improved = slot[~grew]
        best[improved] = gmax[~grew]
        best_theta[:, improved] = theta[:, ~grew]
        done = gmax <= config.tolerance
        bad = grew & ~done
        if bad.any():
            out[:, pending[bad]] = best_theta[:, slot[bad]]
            stalled.extend(pending[bad].tolist())
        live = ~done & ~bad
        if not live.any():
            return stalled
        pending, G, fixed = pending[live], G[:, live], fixed[live]
        V = Hinv @ G
        ratio = V[fixed, np.arange(pending.size)] / Hinv[fixed, fixed]
        out[:, pending] -= V - Hinv[:, fixed] * ratio
        out[fixed, pending] = 0.0
    slot = np.searchsorted(cols, pending)
    out[:, pending] = best_theta[:, slot]
    return stalled + pending.tolist()


@dataclass(frozen=True)
class LofoResult:
    specs: list
    baseline: float
    deltas: dict
    fold_baselines: np.ndarray


def lofo_importances(specs, table, rows=None, folds=5, seed=0, train_config=None,
                     refit="exact"):
    """Leave-one-feature-out importance ``baseline - PR-AUC without spec``.

    Baseline and leave-out scores are means over stratified folds with
    fold-local standardization. Positive values mean the spec helps.
    """
    specs = list(specs)
    if len(specs) < 2:
        raise DataError("LOFO needs at least two specs")
    cv = _CrossValidator(table, rows, specs, folds, seed, train_config or TrainConfig())
    base, without, _ = cv.lofo(list(range(len(specs))), refit)
    baseline = float(base.mean())
    deltas = {s.name: float(baseline - without[:, j].mean()) for j, s in enumerate(specs)}
    return LofoResult(specs, baseline, deltas, base)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    retained: tuple
    raw: dict
    smoothed: dict
    baseline: float
    eliminated: Optional[str]


@dataclass
class SelectionTrace:
    iterations: list = field(default_factory=list)
    best_iteration: int = -1
    best_pr_auc: float = -np.inf
    best_subset: tuple = ()

    def to_csv(self, path):
        rows = []
        for rec in self.iterations:
            sm = rec.smoothed.get(rec.eliminated) if rec.eliminated else None
            rows.append((rec.iteration, len(rec.retained), rec.eliminated or "",
                         rec.baseline, sm))
        write_csv(path, ["iteration", "n_retained", "eliminated", "baseline_pr_auc",
                         "smoothed_delta"], rows)

    def details_to_csv(self, path):
        rows = [(rec.iteration, name, rec.raw[name], rec.smoothed[name])
                for rec in self.iterations for name in rec.retained]
        write_csv(path, ["iteration", "spec", "delta", "smoothed_delta"], rows)


@dataclass(frozen=True)
class RfeResult:
    selected: list
    trace: SelectionTrace


def rfe_loop(specs, table, rows=None, config=None, train_config=None, progress=None):
    """Recursive elimination of the spec with the lowest smoothed LOFO importance.

    Each spec's importance is smoothed by the mean of its last
    ``smoothing_window`` values. The loop stops once the baseline PR-AUC has
    stayed more than ``decline_tolerance`` (relative) below the best seen
    for ``decline_patience`` consecutive iterations, or ``min_features``
    specs remain; the best-scoring subset is returned.
    """
    config = config or RfeConfig()
    train_config = train_config or TrainConfig()
    specs = list(specs)
    if len(specs) < 2:
        raise DataError("elimination needs at least two specs")
    cv = _CrossValidator(table, rows, specs, config.folds, config.seed, train_config)
    active = list(range(len(specs)))
    history = {s.name: [] for s in specs}
    trace = SelectionTrace()
    warm = None
    below = 0
    it = 0
    while True:
        base, without, thetas = cv.lofo(active, config.refit, warm)
        baseline = float(base.mean())
        names = [specs[j].name for j in active]
        raw = {nm: float(baseline - without[:, i].mean()) for i, nm in enumerate(names)}
        smoothed = {}
        for nm in names:
            history[nm].append(raw[nm])
            recent = history[nm][-config.smoothing_window:]
            smoothed[nm] = float(sum(recent) / len(recent))
        if baseline > trace.best_pr_auc:
            trace.best_pr_auc = baseline
            trace.best_iteration = it
            trace.best_subset = tuple(names)
        if baseline < trace.best_pr_auc * (1.0 - config.decline_tolerance):
            below += 1
        else:
            below = 0
        victim = None
        if below < config.decline_patience and len(active) > config.min_features:
            pos = min(range(len(active)),
                      key=lambda i: (smoothed[names[i]], specs[active[i]].sort_key()))
            victim = pos
        trace.iterations.append(IterationRecord(
            it, tuple(names), raw, smoothed, baseline,
            None if victim is None else names[victim]))
        if progress is not None:
            progress(trace.iterations[-1])
        if victim is None:
            break
        warm = [np.delete(th, victim + 1) for th in thetas]
        del active[victim]
        it += 1
    best = set(trace.best_subset)
    return RfeResult([s for s in specs if s.name in best], trace)


@dataclass(frozen=True)
class PermutationResult:
    names: list
    mean_drop: np.ndarray
    std_drop: np.ndarray
    baseline: float

    def to_csv(self, path):
        order = np.argsort(-self.mean_drop, kind="stable")
        write_csv(path, ["spec", "mean_pr_auc_drop", "std_pr_auc_drop"],
                  [(self.names[i], float(self.mean_drop[i]), float(self.std_drop[i]))
                   for i in order])


def permutation_importance(model, table, rows=None, repeats=10, seed=0):
    """Mean PR-AUC drop when each materialized model input is shuffled."""
    rows = _sorted_rows(table, rows)
    y = _labels(table, rows)
    if y.min() == y.max():
        raise DegenerateDataError("permutation importance needs both classes in the data")
    X = model.standardizer.transform(materialize(table, model.feature_specs, rows,
                                                 check_finite=True))
    beta = model.coefficients
    base = pr_auc(sigmoid(X @ beta + model.intercept), y)
    rng = np.random.default_rng(seed)
    drops = np.empty((X.shape[1], repeats))
    Xp = X.copy()
    for j in range(X.shape[1]):
        for r in range(repeats):
            Xp[:, j] = X[rng.permutation(X.shape[0]), j]
            drops[j, r] = base - pr_auc(sigmoid(Xp @ beta + model.intercept), y)
        Xp[:, j] = X[:, j]
    return PermutationResult([s.name for s in model.feature_specs], drops.mean(axis=1),
                             drops.std(axis=1), base)
