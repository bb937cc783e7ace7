"""Ingestion of per-cell CSV exports, thrombus labels and stratified splits."""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from ._io import atomic_open, write_json
from .errors import DataError, DegenerateDataError, InputMissingError

# initial activated-platelet concentration, platelets per m^3
DEFAULT_AP0 = 2.5e13

LABEL_SOURCES = ("binary", "ap_concentration", "sap_column")

# stratified split fractions in 25ths: test 20%, train 80% * 80%, validation 80% * 20%
_SPLIT_PARTS = ("test", "train", "validation")
_SPLIT_WEIGHTS = (5, 16, 4)


@dataclass(frozen=True)
class FeatureTable:
    """Immutable columnar table of per-cell flow features.

    ``columns`` maps each name to a read-only float64 array of length
    ``n_rows``. ``label`` is an optional 0/1 int8 array.
    """

    columns: dict
    label: Optional[np.ndarray] = None
    rejected_rows: int = 0

    def __post_init__(self):
        names = list(self.columns)
        if len(set(names)) != len(names):
            raise DataError("column names must be unique")
        frozen = {}
        n = None
        for name, values in self.columns.items():
            arr = np.array(values, dtype=np.float64, copy=True)
            if arr.ndim != 1:
                raise DataError(f"column {name!r} is not one-dimensional")
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise DataError(f"column {name!r} has {arr.shape[0]} rows, expected {n}")
            if not np.all(np.isfinite(arr)):
                raise DataError(f"column {name!r} contains non-finite values")
            arr.setflags(write=False)
            frozen[name] = arr
        object.__setattr__(self, "columns", frozen)
        if self.label is not None:
            lab = np.asarray(self.label)
            if n is not None and lab.shape != (n,):
                raise DataError("label length does not match n_rows")
            if lab.size and not np.all((lab == 0) | (lab == 1)):
                raise DataError("label must be binary 0/1")
            lab = lab.astype(np.int8, copy=True)
            lab.setflags(write=False)
            object.__setattr__(self, "label", lab)

    @property
    def column_names(self):
        return list(self.columns)

    @property
    def n_rows(self):
        if self.columns:
            return next(iter(self.columns.values())).shape[0]
        return 0 if self.label is None else self.label.shape[0]

    def __getitem__(self, name):
        return self.columns[name]

    def matrix(self, names=None, rows=None):
        """Stack the named columns into an (n, d) float64 array."""
        names = self.column_names if names is None else list(names)
        missing = [nm for nm in names if nm not in self.columns]
        if missing:
            raise DataError(f"missing columns: {missing}")
        out = np.empty((self.n_rows if rows is None else len(rows), len(names)))
        for j, nm in enumerate(names):
            out[:, j] = self.columns[nm] if rows is None else self.columns[nm][rows]
        return out

    def take(self, rows):
        rows = np.asarray(rows, dtype=np.intp)
        label = None if self.label is None else self.label[rows]
        return FeatureTable({k: v[rows] for k, v in self.columns.items()}, label)

    def with_label(self, label):
        return FeatureTable(self.columns, label, self.rejected_rows)

    @classmethod
    def from_frame(cls, frame, label_column=None):
        label = None
        if label_column is not None:
            label = frame[label_column].to_numpy()
            frame = frame.drop(columns=[label_column])
        return cls({str(c): frame[c].to_numpy(dtype=np.float64) for c in frame.columns}, label)


@dataclass(frozen=True)
class LabelSpec:
    """How the binary thrombus label is obtained.

    ``binary`` reads 0/1 values from ``column``; ``ap_concentration`` converts
    activated-platelet concentrations to sAP before thresholding;
    ``sap_column`` thresholds an sAP column directly.
    """

    source: str = "binary"
    column: str = "Thrombus"
    ap0: float = DEFAULT_AP0
    threshold: float = 6.0

    def __post_init__(self):
        if self.source not in LABEL_SOURCES:
            raise DataError(f"unknown label source {self.source!r}; choose from {LABEL_SOURCES}")
        if not (self.ap0 > 0 and math.isfinite(self.ap0)):
            raise DataError("ap0 must be positive and finite")
        if not math.isfinite(self.threshold):
            raise DataError("threshold must be finite")

    def to_dict(self):
        return {"source": self.source, "column": self.column, "ap0": self.ap0,
                "threshold": self.threshold}


@dataclass(frozen=True)
class IngestConfig:
    label: Optional[LabelSpec] = field(default_factory=LabelSpec)
    require_label: bool = True
    drop_columns: tuple = ()
    chunksize: int = 250_000


def compute_sap(ap, ap0=DEFAULT_AP0):
    """Per-mille increase of activated platelets over the initial concentration."""
    if not ap0 > 0:
        raise DataError("ap0 must be positive")
    ap = np.asarray(ap, dtype=np.float64)
    return 1000.0 * (ap - ap0) / ap0


def label_threshold(sap, threshold):
    """1 where sAP is strictly above ``threshold``, else 0."""
    sap = np.asarray(sap, dtype=np.float64)
    return (sap > threshold).astype(np.int8)


def make_labels(values, spec):
    values = np.asarray(values, dtype=np.float64)
    if spec.source == "binary":
        if not np.all((values == 0) | (values == 1)):
            raise DataError(f"label column {spec.column!r} must contain only 0/1")
        return values.astype(np.int8)
    if spec.source == "ap_concentration":
        values = compute_sap(values, spec.ap0)
    return label_threshold(values, spec.threshold)


def _read_header(path):
    with open(path, newline="", encoding="utf-8") as fh:
        try:
            header = next(csv.reader(fh))
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
    header = [h.strip() for h in header]
    seen, dupes = set(), []
    for h in header:
        if h in seen:
            dupes.append(h)
        seen.add(h)
    if dupes:
        raise DataError(f"{path}: duplicate header names {sorted(set(dupes))}")
    return header


def _check_numeric(chunk, offset):
    for col in chunk.columns:
        if chunk[col].dtype.kind in "fiub":
            continue
        coerced = pd.to_numeric(chunk[col], errors="coerce")
        bad = coerced.isna() & chunk[col].notna()
        if not bad.any():
            chunk[col] = coerced
            continue
        pos = int(np.flatnonzero(bad.to_numpy())[0])
        raise DataError(
            f"non-numeric value {chunk[col].iloc[pos]!r} in column {col!r} "
            f"(data row {offset + pos + 1})"
        )


def ingest_csv(path, config=None):
    """Read a comma-separated per-cell export into a :class:`FeatureTable`.

    Rows holding any NaN/Inf are dropped and counted in
    ``FeatureTable.rejected_rows``.
    """
    config = config or IngestConfig()
    path = Path(path)
    if not path.is_file():
        raise InputMissingError(f"input file not found: {path}")
    header = _read_header(path)
    spec = config.label
    label_col = spec.column if spec is not None else None
    if label_col is not None and label_col not in header:
        if config.require_label:
            raise DataError(f"{path}: label column {label_col!r} absent")
        label_col = None
    drop = set(config.drop_columns)
    feature_names = [h for h in header if h != label_col and h not in drop]

    feats = {name: [] for name in feature_names}
    labels = []
    rejected = 0
    offset = 0
    reader = pd.read_csv(path, chunksize=config.chunksize, skipinitialspace=True,
                         float_precision="round_trip", header=0, names=header,
                         usecols=feature_names + ([label_col] if label_col else []))
    for chunk in reader:
        chunk.columns = [str(c).strip() for c in chunk.columns]
        _check_numeric(chunk, offset)
        block = chunk[feature_names].to_numpy(dtype=np.float64)
        ok = np.isfinite(block).all(axis=1)
        if label_col:
            lab = chunk[label_col].to_numpy(dtype=np.float64)
            ok &= np.isfinite(lab)
            labels.append(lab[ok])
        rejected += int((~ok).sum())
        for j, name in enumerate(feature_names):
            feats[name].append(block[ok, j])
        offset += len(chunk)

    columns = {name: (np.concatenate(parts) if parts else np.empty(0)) for name, parts in feats.items()}
    label = None
    if label_col:
        raw = np.concatenate(labels) if labels else np.empty(0)
        label = make_labels(raw, spec)
    return FeatureTable(columns, label, rejected)


def write_csv_table(path, table, label_column="Thrombus", extra=None):
    """Write a table in the same dialect :func:`ingest_csv` reads."""
    frame = pd.DataFrame(table.columns)
    for name, values in (extra or {}).items():
        frame[name] = values
    if table.label is not None and label_column:
        frame[label_column] = table.label.astype(int)
    with atomic_open(path, newline="") as fh:
        frame.to_csv(fh, index=False, float_format="%.17g", lineterminator="\n")


@dataclass(frozen=True)
class SplitIndices:
    test: np.ndarray
    train: np.ndarray
    validation: np.ndarray
    seed: int

    def __post_init__(self):
        for part in _SPLIT_PARTS:
            arr = np.asarray(getattr(self, part), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, part, arr)

    @property
    def n_rows(self):
        return self.test.size + self.train.size + self.validation.size

    def parts(self):
        return {p: getattr(self, p) for p in _SPLIT_PARTS}


def _largest_remainder(count):
    quotas = [count * w for w in _SPLIT_WEIGHTS]
    total = sum(_SPLIT_WEIGHTS)
    alloc = [q // total for q in quotas]
    rem = [q % total for q in quotas]
    left = count - sum(alloc)
    # stable on ties: earlier part wins
    for idx in sorted(range(len(alloc)), key=lambda i: -rem[i])[:left]:
        alloc[idx] += 1
    return alloc


def _check_binary(labels):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise DataError("labels must be one-dimensional")
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must be binary 0/1")
    return labels.astype(np.int8)


def stratified_split(labels, seed):
    """Stratified 20% test / 64% train / 16% validation split.

    Per-class counts use largest-remainder rounding; the row draw is
    seeded so the result is a pure function of ``(labels, seed)``.
    """
    labels = _check_binary(labels)
    n = labels.size
    if n < 25:
        raise DataError(f"need at least 25 rows to split, got {n}")
    rng = np.random.default_rng(seed)
    parts = {p: [] for p in _SPLIT_PARTS}
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        if idx.size == 0:
            raise DegenerateDataError("stratified split needs both classes present")
        alloc = _largest_remainder(idx.size)
        if min(alloc) == 0:
            raise DegenerateDataError(
                f"class {cls} has {idx.size} rows, too few to place one in every split"
            )
        perm = idx[rng.permutation(idx.size)]
        start = 0
        for part, k in zip(_SPLIT_PARTS, alloc):
            parts[part].append(perm[start:start + k])
            start += k
    return SplitIndices(**{p: np.sort(np.concatenate(v)) for p, v in parts.items()}, seed=int(seed))


def write_split_manifest(directory, split, labels):
    """Write ``manifest.json`` plus one index file per split (one integer per line)."""
    directory = Path(directory)
    labels = np.asarray(labels)
    summary = {"seed": split.seed, "n_rows": int(split.n_rows), "splits": {}}
    for part, idx in split.parts().items():
        with atomic_open(directory / f"{part}.txt") as fh:
            fh.write("".join(f"{i}\n" for i in idx.tolist()))
        summary["splits"][part] = {
            "rows": int(idx.size),
            "positives": int(labels[idx].sum()),
            "file": f"{part}.txt",
        }
    write_json(directory / "manifest.json", summary)


def read_split_manifest(directory):
    directory = Path(directory)
    path = directory / "manifest.json"
    if not path.is_file():
        raise InputMissingError(f"split manifest not found: {path}")
    summary = json.loads(path.read_text())
    parts = {}
    for part in _SPLIT_PARTS:
        parts[part] = np.loadtxt(directory / summary["splits"][part]["file"], dtype=np.int64, ndmin=1)
    return SplitIndices(**parts, seed=summary["seed"])
