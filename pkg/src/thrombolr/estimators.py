"""scikit-learn style wrappers around the functional core.

All estimators accept a 2-D array or a DataFrame; array columns are named
``x0..x{d-1}`` unless ``feature_names`` is passed to ``fit``.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_table
from .export import emit_expression
from .features import (LOG_EPSILON, FeatureSpec, ScreenConfig, candidate_specs, materialize,
                       screen_columns)
from .linmod import TrainConfig, sigmoid
from .selection import RfeConfig, importance_screen, rfe_loop, train_model


def _record_names(est, X, table):
    # sklearn convention: feature_names_in_ only for named (DataFrame) input
    est.columns_ = list(table.column_names)
    if hasattr(X, "columns"):
        est.feature_names_in_ = np.array(est.columns_, dtype=object)


class _TrainParams:
    def _train_config(self):
        return TrainConfig(l2_strength=self.l2_strength, tolerance=self.tol,
                           max_iterations=self.max_iter, class_weighting=self.class_weight)


class BalancedLogisticRegression(_TrainParams, ClassifierMixin, BaseEstimator):
    """L2 logistic regression with class-balanced sample weights.

    Inputs are standardized with training statistics, so ``coef_`` is on
    the standardized scale, matching how importances are read.

    Parameters
    ----------
    l2_strength : float, default=1.0
        Penalty ``lam`` in ``(lam / 2) * ||beta||^2``; the intercept is free.
    tol : float, default=1e-8
        Gradient max-norm at convergence.
    max_iter : int, default=200
    class_weight : {"balanced", "none"}, default="balanced"
    """

    def __init__(self, l2_strength=1.0, tol=1e-8, max_iter=200, class_weight="balanced"):
        self.l2_strength = l2_strength
        self.tol = tol
        self.max_iter = max_iter
        self.class_weight = class_weight

    def fit(self, X, y, feature_names=None):
        table = as_table(X, y, feature_names)
        specs = [FeatureSpec.base(nm) for nm in table.column_names]
        self.model_ = train_model(table, None, specs, self._train_config())
        self.coef_ = np.asarray(self.model_.coefficients)
        self.intercept_ = self.model_.intercept
        self.classes_ = np.array([0, 1])
        _record_names(self, X, table)
        self.n_features_in_ = len(specs)
        self.n_iter_ = self.model_.fit_info["n_iter"]
        return self

    def _table(self, X):
        check_is_fitted(self, "model_")
        names = self.columns_ if not hasattr(X, "columns") else None
        return as_table(X, names=names)

    def decision_function(self, X):
        table = self._table(X)
        return self.model_.decision_function(table)

    def predict_proba(self, X):
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.decision_function(X) >= 0).astype(np.int64)


class FeatureEngineer(TransformerMixin, BaseEstimator):
    """Expand base columns into SQ, shifted LOG and pairwise IX features.

    LOG shifts are learned in ``fit`` so that every training value maps to
    a positive log argument.
    """

    def __init__(self, include_base=True, epsilon=LOG_EPSILON):
        self.include_base = include_base
        self.epsilon = epsilon

    def fit(self, X, y=None, feature_names=None):
        table = as_table(X, names=feature_names)
        _record_names(self, X, table)
        self.n_features_in_ = len(table.column_names)
        self.specs_ = candidate_specs(table.column_names, table, None, self.include_base,
                                      self.epsilon)
        return self

    def transform(self, X):
        check_is_fitted(self, "specs_")
        names = self.columns_ if not hasattr(X, "columns") else None
        return materialize(as_table(X, names=names), self.specs_, check_finite=True)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "specs_")
        return np.array([s.name for s in self.specs_], dtype=object)


class LofoRFE(_TrainParams, SelectorMixin, BaseEstimator):
    """Recursive elimination by smoothed leave-one-feature-out PR-AUC loss.

    Every input column is one candidate. After ``fit``, ``support_`` marks
    the subset with the best cross-validated PR-AUC and ``trace_`` records
    each iteration.
    """

    def __init__(self, folds=5, smoothing_window=5, decline_tolerance=0.005,
                 decline_patience=3, min_features=2, refit="exact", seed=0,
                 l2_strength=1.0, tol=1e-8, max_iter=200, class_weight="balanced"):
        self.folds = folds
        self.smoothing_window = smoothing_window
        self.decline_tolerance = decline_tolerance
        self.decline_patience = decline_patience
        self.min_features = min_features
        self.refit = refit
        self.seed = seed
        self.l2_strength = l2_strength
        self.tol = tol
        self.max_iter = max_iter
        self.class_weight = class_weight

    def fit(self, X, y, feature_names=None):
        table = as_table(X, y, feature_names)
        config = RfeConfig(self.folds, self.smoothing_window, self.decline_tolerance,
                           self.decline_patience, self.min_features, self.refit, self.seed)
        specs = [FeatureSpec.base(nm) for nm in table.column_names]
        result = rfe_loop(specs, table, None, config, self._train_config())
        chosen = {s.name for s in result.selected}
        _record_names(self, X, table)
        self.n_features_in_ = len(specs)
        self.support_ = np.array([nm in chosen for nm in table.column_names])
        self.trace_ = result.trace
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_")
        return self.support_


class ThrombosisRiskClassifier(_TrainParams, ClassifierMixin, BaseEstimator):
    """Screen, engineer, select and fit in one estimator.

    ``fit`` treats every row it receives as training data; hold out test
    rows before calling it.
    """

    def __init__(self, exclusion_patterns=("Coordinate*",), correlation_threshold=0.95,
                 importance_cutoff=0.01, folds=5, smoothing_window=5,
                 decline_tolerance=0.005, decline_patience=3, refit="exact", seed=0,
                 l2_strength=1.0, tol=1e-8, max_iter=200, class_weight="balanced"):
        self.exclusion_patterns = exclusion_patterns
        self.correlation_threshold = correlation_threshold
        self.importance_cutoff = importance_cutoff
        self.folds = folds
        self.smoothing_window = smoothing_window
        self.decline_tolerance = decline_tolerance
        self.decline_patience = decline_patience
        self.refit = refit
        self.seed = seed
        self.l2_strength = l2_strength
        self.tol = tol
        self.max_iter = max_iter
        self.class_weight = class_weight

    def fit(self, X, y, feature_names=None):
        table = as_table(X, y, feature_names)
        train = self._train_config()
        screen = screen_columns(table, ScreenConfig(
            tuple(self.exclusion_patterns), correlation_threshold=self.correlation_threshold,
            importance_cutoff=self.importance_cutoff))
        imp = importance_screen(table, None, screen.retained, self.importance_cutoff, train)
        candidates = candidate_specs(imp.kept, table)
        config = RfeConfig(self.folds, self.smoothing_window, self.decline_tolerance,
                           self.decline_patience, 2, self.refit, self.seed)
        result = rfe_loop(candidates, table, None, config, train)
        self.model_ = train_model(table, None, result.selected, train)
        self.base_features_ = list(imp.kept)
        self.screen_report_ = screen.removed
        self.trace_ = result.trace
        self.selected_specs_ = list(result.selected)
        _record_names(self, X, table)
        self.n_features_in_ = len(table.column_names)
        self.classes_ = np.array([0, 1])
        return self

    def _table(self, X):
        check_is_fitted(self, "model_")
        names = self.columns_ if not hasattr(X, "columns") else None
        return as_table(X, names=names)

    def decision_function(self, X):
        table = self._table(X)
        return self.model_.decision_function(table)

    def predict_proba(self, X):
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.decision_function(X) >= 0).astype(np.int64)

    def to_expression(self, dialect=None):
        check_is_fitted(self, "model_")
        return emit_expression(self.model_, dialect)
