"""Precision-recall evaluation for rare-positive classification."""

from dataclasses import dataclass

import numpy as np

from ._io import write_csv
from .errors import DataError, DegenerateDataError


def _prepare(probs, labels):
    s = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or y.ndim != 1:
        raise DataError("scores and labels must be one-dimensional")
    if s.shape != y.shape:
        raise DataError(f"length mismatch: {s.size} scores vs {y.size} labels")
    if not np.all(np.isfinite(s)):
        raise DataError("scores must be finite")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be binary 0/1")
    return s, y.astype(bool)


def confusion_at(probs, labels, threshold):
    """Return ``(TP, FP, FN, TN)``; a row is predicted positive iff prob >= threshold."""
    s, y = _prepare(probs, labels)
    pred = s >= threshold
    tp = int(np.count_nonzero(pred & y))
    fp = int(np.count_nonzero(pred & ~y))
    fn = int(np.count_nonzero(~pred & y))
    tn = int(np.count_nonzero(~pred & ~y))
    return tp, fp, fn, tn


@dataclass(frozen=True)
class PrCurve:
    """Precision and recall at every distinct score, highest threshold first."""

    thresholds: np.ndarray
    recall: np.ndarray
    precision: np.ndarray
    positives: int
    negatives: int

    @property
    def points(self):
        return list(zip(self.recall.tolist(), self.precision.tolist(), self.thresholds.tolist()))

    def to_csv(self, path):
        write_csv(path, ["threshold", "recall", "precision"],
                  zip(self.thresholds.tolist(), self.recall.tolist(), self.precision.tolist()))


def pr_curve(probs, labels):
    s, y = _prepare(probs, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise DegenerateDataError("precision-recall curve needs at least one positive")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    # last index of each tie group in the descending sweep
    ends = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    tp = np.cumsum(y_sorted)[ends]
    seen = ends + 1
    return PrCurve(
        thresholds=s_sorted[ends],
        recall=tp / n_pos,
        precision=tp / seen,
        positives=n_pos,
        negatives=int(s.size - n_pos),
    )


def _average_precision(s, y):
    pos = s[y]
    n_pos = pos.size
    thr, counts = np.unique(pos, return_counts=True)  # ascending
    tp = n_pos - np.cumsum(counts) + counts
    # negatives at or above thr[i] are those whose bucket index exceeds i
    bucket = np.searchsorted(thr, s[~y], side="right")
    fp = np.cumsum(np.bincount(bucket, minlength=thr.size + 1)[::-1])[::-1][1:]
    return float(np.sum(counts * (tp / (tp + fp))) / n_pos)


def pr_auc(probs, labels):
    """Average precision: sum over descending thresholds of ``(R_k - R_{k-1}) * P_k``.

    Step integration, no linear interpolation between curve points.
    """
    s, y = _prepare(probs, labels)
    if not y.any():
        raise DegenerateDataError("PR-AUC needs at least one positive")
    return _average_precision(s, y)


def pr_auc_columns(scores, labels):
    """PR-AUC of every column of an ``(n, m)`` score matrix against one label vector."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise DataError("scores must be two-dimensional")
    y = np.asarray(labels).astype(bool)
    if scores.shape[0] != y.size:
        raise DataError("length mismatch between scores and labels")
    if not y.any():
        raise DegenerateDataError("PR-AUC needs at least one positive")
    if not np.all(np.isfinite(scores)):
        raise DataError("scores must be finite")
    cols = np.asfortranarray(scores)
    return np.array([_average_precision(cols[:, j], y) for j in range(cols.shape[1])])
