"""Interpretable thrombosis-risk classification from tabular flow features.

A class-balanced L2 logistic model, column screening, SQ/LOG/IX feature
engineering, recursive leave-one-feature-out elimination, permutation
importance, and export of the fitted model as a closed-form expression.
"""

__version__ = "0.1.0"

from .dataset import (FeatureTable, LabelSpec, SplitIndices, compute_sap, ingest_csv,
                      make_labels, stratified_split)
from .errors import ThrombolrError
from .estimators import (BalancedLogisticRegression, FeatureEngineer, LofoRFE,
                         ThrombosisRiskClassifier)
from .export import (ExpressionDialect, ModelArtifact, emit_expression, load_artifact,
                     save_artifact)
from .expression import evaluate_expression
from .features import FeatureSpec, ScreenConfig, candidate_specs, screen_columns
from .linmod import (LogisticModel, TrainConfig, coefficient_importance, fit_logistic,
                     predict_proba)
from .metrics import pr_auc, pr_curve
from .selection import (RfeConfig, lofo_importances, permutation_importance, rfe_loop,
                        train_model)
from .synth import PlantedTruth, generate

__all__ = [
    "BalancedLogisticRegression", "ExpressionDialect", "FeatureEngineer", "FeatureSpec",
    "FeatureTable", "LabelSpec", "LofoRFE", "LogisticModel", "ModelArtifact", "PlantedTruth",
    "RfeConfig", "ScreenConfig", "SplitIndices", "ThrombolrError", "ThrombosisRiskClassifier",
    "TrainConfig", "candidate_specs", "coefficient_importance", "compute_sap",
    "emit_expression", "evaluate_expression", "fit_logistic", "generate", "ingest_csv",
    "load_artifact", "lofo_importances", "make_labels", "permutation_importance", "pr_auc",
    "pr_curve", "predict_proba", "rfe_loop", "save_artifact", "screen_columns",
    "stratified_split", "train_model",
]
