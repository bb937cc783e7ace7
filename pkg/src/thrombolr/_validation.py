"""Input validation shared by the estimator wrappers."""

import numpy as np
from sklearn.utils.validation import check_array, column_or_1d

from .dataset import FeatureTable
from .errors import DataError, DegenerateDataError


def feature_names(X, names=None):
    """Column names from a DataFrame, an explicit list, or ``x0..x{d-1}``."""
    if names is not None:
        names = [str(n) for n in names]
    elif hasattr(X, "columns"):
        names = [str(c) for c in X.columns]
    else:
        d = np.shape(X)[1] if np.ndim(X) == 2 else 0
        names = [f"x{j}" for j in range(d)]
    if len(set(names)) != len(names):
        raise DataError("feature names must be unique")
    return names


def check_binary_labels(y, n_rows=None):
    y = column_or_1d(np.asarray(y), warn=True)
    if n_rows is not None and y.size != n_rows:
        raise DataError(f"{y.size} labels for {n_rows} rows")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be binary 0/1")
    if y.size and y.min() == y.max():
        raise DegenerateDataError("labels contain a single class")
    return y.astype(np.int8)


def as_table(X, y=None, names=None):
    """Validate ``X`` (and ``y``) and wrap them in a :class:`FeatureTable`."""
    if isinstance(X, FeatureTable):
        if y is not None:
            return X.with_label(check_binary_labels(y, X.n_rows))
        return X
    names = feature_names(X, names)
    arr = check_array(X, dtype=np.float64)
    if arr.shape[1] != len(names):
        raise DataError(f"{len(names)} names for {arr.shape[1]} columns")
    label = None if y is None else check_binary_labels(y, arr.shape[0])
    return FeatureTable({nm: arr[:, j] for j, nm in enumerate(names)}, label)
