"""Class-balanced, L2-regularized logistic regression.

The objective is the weighted sum log-loss plus ``(lam / 2) * ||beta||^2``
with an unpenalized intercept, minimized by damped Newton iterations from
``beta = 0``. Parameter vectors are laid out as ``theta = [b0, beta...]``.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.special import expit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import ConvergenceError, DataError, DegenerateDataError

CLASS_WEIGHTINGS = ("balanced", "none")

_CURVATURE_FLOOR = 1e-10


def sigmoid(z):
    """Logistic function, evaluated without overflow for any finite ``z``."""
    z = np.asarray(z, dtype=np.float64)
    # exp(-|z|) never overflows; pick the algebraically matching branch by sign
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def _binary(labels):
    y = np.asarray(labels)
    if y.ndim != 1:
        raise DataError("labels must be one-dimensional")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be binary 0/1")
    return y.astype(np.float64)


def class_weights(labels):
    """Return ``(w_pos, w_neg)`` with ``w_c = n / (2 n_c)``."""
    y = _binary(labels)
    n = y.size
    n_pos = int(y.sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateDataError("class weighting needs both classes present")
    return n / (2.0 * n_pos), n / (2.0 * n_neg)


def sample_weights(labels, class_weighting="balanced"):
    y = _binary(labels)
    if class_weighting == "none":
        return np.ones_like(y)
    if class_weighting != "balanced":
        raise ValueError(f"class_weighting must be one of {CLASS_WEIGHTINGS}")
    w_pos, w_neg = class_weights(y)
    return np.where(y == 1, w_pos, w_neg)


@dataclass(frozen=True)
class TrainConfig:
    l2_strength: float = 1.0
    tolerance: float = 1e-8
    max_iterations: int = 200
    class_weighting: str = "balanced"

    def __post_init__(self):
        if not self.l2_strength > 0:
            raise ValueError("l2_strength must be > 0")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.class_weighting not in CLASS_WEIGHTINGS:
            raise ValueError(f"class_weighting must be one of {CLASS_WEIGHTINGS}")


class LogisticObjective:
    """Weighted log-loss with ridge penalty on a fixed design matrix."""

    def __init__(self, X, y, weights, l2_strength):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        self.w = np.asarray(weights, dtype=np.float64)
        self.lam = float(l2_strength)

    @property
    def n_params(self):
        return self.X.shape[1] + 1

    def linear(self, theta):
        return self.X @ theta[1:] + theta[0]

    def value(self, theta, z=None):
        theta = np.asarray(theta, dtype=np.float64)
        z = self.linear(theta) if z is None else z
        # softplus(z) - y z  ==  -y ln p - (1 - y) ln(1 - p)
        loss = self.w @ (np.logaddexp(0.0, z) - self.y * z)
        return float(loss + 0.5 * self.lam * (theta[1:] @ theta[1:]))

    def gradient(self, theta, z=None):
        theta = np.asarray(theta, dtype=np.float64)
        z = self.linear(theta) if z is None else z
        r = self.w * (expit(z) - self.y)
        g = np.empty_like(theta)
        g[0] = r.sum()
        g[1:] = self.X.T @ r + self.lam * theta[1:]
        return g

    def hessian(self, theta, z=None):
        theta = np.asarray(theta, dtype=np.float64)
        z = self.linear(theta) if z is None else z
        p = expit(z)
        s = self.w * p * (1.0 - p)
        d = self.X.shape[1]
        H = np.empty((d + 1, d + 1))
        H[0, 0] = s.sum()
        H[0, 1:] = H[1:, 0] = self.X.T @ s
        # Rows with negligible curvature weight only perturb the step metric,
        # never the stationarity test on the exact gradient.
        live = s > _CURVATURE_FLOOR * s.max()
        if live.mean() < 0.5:
            Xs = self.X[live] * np.sqrt(s[live])[:, None]
        else:
            Xs = self.X * np.sqrt(s)[:, None]
        H[1:, 1:] = Xs.T @ Xs
        H[1:, 1:] += self.lam * np.eye(d)
        return H


@dataclass(frozen=True)
class LogisticFit:
    intercept: float
    coef: np.ndarray
    n_iter: int
    grad_norm: float
    objective: float

    @property
    def theta(self):
        return np.concatenate([[self.intercept], self.coef])


def _newton_direction(H, g):
    try:
        return -linalg.cho_solve(linalg.cho_factor(H, lower=False, check_finite=False), g,
                                 check_finite=False)
    except linalg.LinAlgError:
        return -linalg.lstsq(H, g, check_finite=False)[0]


def fit_logistic(X, y, config=None, sample_weight=None, init=None):
    """Minimize the class-weighted ridge logistic objective on ``X``.

    ``X`` is used as given (callers standardize). Iterates damped Newton
    steps with Armijo backtracking until the gradient max-norm is at most
    ``config.tolerance``.

    Raises
    ------
    ConvergenceError
        If the tolerance is not met within ``config.max_iterations`` or the
        line search stalls; the final gradient norm is attached.
    """
    config = config or TrainConfig()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("X must be two-dimensional")
    yv = _binary(y)
    if X.shape[0] != yv.size:
        raise DataError("X and y have different numbers of rows")
    if not np.all(np.isfinite(X)):
        raise DataError("X contains non-finite values")
    if sample_weight is None:
        sample_weight = sample_weights(yv, config.class_weighting)
    elif yv.min() == yv.max():
        raise DegenerateDataError("fit needs both classes present")

    obj = LogisticObjective(X, yv, sample_weight, config.l2_strength)
    theta = np.zeros(obj.n_params) if init is None else np.array(init, dtype=np.float64)
    if theta.shape != (obj.n_params,):
        raise ValueError("init has the wrong length")

    eps = np.finfo(np.float64).eps
    z = obj.linear(theta)
    f = obj.value(theta, z)
    for it in range(config.max_iterations + 1):
        g = obj.gradient(theta, z)
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= config.tolerance:
            return LogisticFit(float(theta[0]), theta[1:].copy(), it, gnorm, f)
        if it == config.max_iterations:
            break
        step = _newton_direction(obj.hessian(theta, z), g)
        slope = float(g @ step)
        # rounding floor of the objective; below it Armijo cannot discriminate
        slack = 64 * eps * max(abs(f), 1.0)
        t = 1.0
        while True:
            trial = theta + t * step
            z_trial = obj.linear(trial)
            f_trial = obj.value(trial, z_trial)
            if f_trial <= f + 1e-4 * t * slope + slack:
                break
            t *= 0.5
            if t < 1e-12:
                raise ConvergenceError(
                    f"line search stalled with gradient max-norm {gnorm:.3e}",
                    grad_norm=gnorm, n_iter=it)
        theta, z, f = trial, z_trial, f_trial
    raise ConvergenceError(
        f"no convergence in {config.max_iterations} iterations "
        f"(gradient max-norm {gnorm:.3e} > {config.tolerance:.1e})",
        grad_norm=gnorm, n_iter=config.max_iterations)


class Standardizer(TransformerMixin, BaseEstimator):
    """Per-column ``(x - mean) / std`` with population std, fit on training rows."""

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        means = X.mean(axis=0)
        stds = X.std(axis=0)
        bad = np.flatnonzero(~(stds > 0))
        if bad.size:
            raise DegenerateDataError(f"zero-variance columns at positions {bad.tolist()}")
        self.means_ = means
        self.stds_ = stds
        self.fitted_on_ = X.shape[0]
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "means_")
        X = check_array(X, dtype=np.float64, ensure_all_finite=False)
        if X.shape[1] != self.means_.size:
            raise DataError(f"expected {self.means_.size} columns, got {X.shape[1]}")
        return (X - self.means_) / self.stds_

    @classmethod
    def from_params(cls, means, stds, fitted_on):
        obj = cls()
        obj.means_ = np.asarray(means, dtype=np.float64)
        obj.stds_ = np.asarray(stds, dtype=np.float64)
        if obj.means_.shape != obj.stds_.shape or not np.all(obj.stds_ > 0):
            raise DataError("standardizer needs matching means and positive stds")
        obj.fitted_on_ = int(fitted_on)
        obj.n_features_in_ = obj.means_.size
        return obj


@dataclass(frozen=True)
class LogisticModel:
    """Fitted logistic model over materialized feature specs."""

    intercept: float
    coefficients: np.ndarray
    feature_specs: tuple
    standardizer: Standardizer
    fit_info: Optional[dict] = field(default=None, compare=False)

    def __post_init__(self):
        coef = np.array(self.coefficients, dtype=np.float64)
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "feature_specs", tuple(self.feature_specs))
        d = coef.size
        if len(self.feature_specs) != d or self.standardizer.means_.size != d:
            raise DataError("coefficients, specs and standardizer must have equal length")
        if not (math.isfinite(self.intercept) and np.all(np.isfinite(coef))):
            raise DataError("model parameters must be finite")

    @property
    def n_features(self):
        return self.coefficients.size

    def design(self, table):
        """Materialize and standardize the model inputs for ``table``."""
        from .features import materialize

        raw = materialize(table, self.feature_specs, check_finite=True)
        return self.standardizer.transform(raw)

    def decision_function(self, table):
        return self.design(table) @ self.coefficients + self.intercept

    def predict_proba(self, table):
        return sigmoid(self.decision_function(table))


def predict_proba(model, rows):
    """Thrombus probability per row of a raw :class:`FeatureTable`."""
    return model.predict_proba(rows)


def coefficient_importance(model_or_coef):
    """Normalized absolute coefficients ``|b_j| / sum_k |b_k|``; intercept excluded."""
    coef = getattr(model_or_coef, "coefficients", model_or_coef)
    mag = np.abs(np.asarray(coef, dtype=np.float64))
    total = mag.sum()
    if not total > 0:
        raise DataError("all coefficients are zero; importance undefined")
    return mag / total
