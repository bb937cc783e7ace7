import json

import numpy as np
import pytest

from thrombolr.dataset import (FeatureTable, IngestConfig, LabelSpec, compute_sap,
                               ingest_csv, label_threshold, make_labels,
                               read_split_manifest, stratified_split, write_csv_table,
                               write_split_manifest)
from thrombolr.errors import DataError, DegenerateDataError, InputMissingError


def test_sap_is_per_mille_increase():
    assert compute_sap(2.5e13) == 0.0
    assert compute_sap(2.5e13 * 1.006) == pytest.approx(6.0)
    assert compute_sap(5e13) == pytest.approx(1000.0)


def test_threshold_is_strict():
    sap = np.array([5.999, 6.0, 6.0000001, 12.0, 12.5])
    assert label_threshold(sap, 6).tolist() == [0, 0, 1, 1, 1]
    assert label_threshold(sap, 12).tolist() == [0, 0, 0, 0, 1]


def test_make_labels_sources():
    ap = np.array([2.5e13, 2.5e13 * 1.01])
    assert make_labels(ap, LabelSpec("ap_concentration", threshold=6)).tolist() == [0, 1]
    assert make_labels(np.array([3.0, 7.0]), LabelSpec("sap_column")).tolist() == [0, 1]
    assert make_labels(np.array([0.0, 1.0]), LabelSpec("binary")).tolist() == [0, 1]
    with pytest.raises(DataError):
        make_labels(np.array([0.0, 2.0]), LabelSpec("binary"))


def test_feature_table_is_read_only():
    t = FeatureTable({"a": [1.0, 2.0]}, [0, 1])
    with pytest.raises(ValueError):
        t.columns["a"][0] = 5.0
    with pytest.raises(DataError):
        FeatureTable({"a": [1.0, np.nan]})
    with pytest.raises(DataError):
        FeatureTable({"a": [1.0, 2.0], "b": [1.0]})


def test_ingest_roundtrip_and_rejects(tmp_path):
    path = tmp_path / "cells.csv"
    path.write_text("u, v ,Thrombus\n1.5,2,0\n0.1,nan,1\n3,4,1\n1e300,inf,0\n")
    table = ingest_csv(path)
    assert table.column_names == ["u", "v"]
    assert table.n_rows == 2
    assert table.rejected_rows == 2
    assert table.label.tolist() == [0, 1]

    out = tmp_path / "again.csv"
    write_csv_table(out, table)
    again = ingest_csv(out)
    for nm in table.column_names:
        assert np.array_equal(again[nm], table[nm])


def test_ingest_errors(tmp_path):
    with pytest.raises(InputMissingError):
        ingest_csv(tmp_path / "absent.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("u,Thrombus\n1,0\nabc,1\n")
    with pytest.raises(DataError, match="u"):
        ingest_csv(bad)
    dup = tmp_path / "dup.csv"
    dup.write_text("u,u,Thrombus\n1,2,0\n")
    with pytest.raises(DataError):
        ingest_csv(dup)
    nolabel = tmp_path / "nolabel.csv"
    nolabel.write_text("u,v\n1,2\n")
    with pytest.raises(DataError):
        ingest_csv(nolabel)
    assert ingest_csv(nolabel, IngestConfig(require_label=False)).label is None


def test_chunked_ingest_matches_single_chunk(tmp_path, rng):
    table = FeatureTable({"a": rng.normal(size=1000), "b": rng.lognormal(size=1000)},
                         (rng.random(1000) < 0.1).astype(int))
    path = tmp_path / "t.csv"
    write_csv_table(path, table)
    small = ingest_csv(path, IngestConfig(chunksize=77))
    assert np.array_equal(small["a"], table["a"])
    assert np.array_equal(small.label, table.label)


def test_split_sizes_small():
    y = np.zeros(1000, dtype=int)
    y[:20] = 1
    sp = stratified_split(y, 0)
    assert (sp.test.size, sp.train.size, sp.validation.size) == (200, 640, 160)
    assert [int(y[p].sum()) for p in (sp.test, sp.train, sp.validation)] == [4, 13, 3]
    allrows = np.concatenate([sp.test, sp.train, sp.validation])
    assert np.array_equal(np.sort(allrows), np.arange(1000))


def test_split_is_seeded():
    y = np.r_[np.ones(50), np.zeros(950)].astype(int)
    a, b, c = stratified_split(y, 7), stratified_split(y, 7), stratified_split(y, 8)
    assert np.array_equal(a.test, b.test)
    assert not np.array_equal(a.test, c.test)


def test_split_degenerate():
    with pytest.raises(DegenerateDataError):
        stratified_split(np.zeros(100, dtype=int), 0)
    y = np.zeros(100, dtype=int)
    y[:2] = 1
    with pytest.raises(DegenerateDataError):
        stratified_split(y, 0)


def test_manifest_roundtrip(tmp_path):
    y = np.r_[np.ones(30), np.zeros(470)].astype(int)
    sp = stratified_split(y, 3)
    write_split_manifest(tmp_path, sp, y)
    back = read_split_manifest(tmp_path)
    for part in ("test", "train", "validation"):
        assert np.array_equal(getattr(back, part), getattr(sp, part))
    summary = json.loads((tmp_path / "manifest.json").read_text())
    assert summary["splits"]["test"]["rows"] == 100
