"""Pipeline stages run from a :class:`PipelineConfig`.

Each stage reads its inputs from the output directory, writes its outputs
atomically and leaves a ``logs/<stage>.log`` carrying the config
fingerprint. Logs hold no timestamps, so identical runs give identical
files. Only :func:`evaluate` may read the held-out test rows.
"""

import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from ._io import atomic_open, write_csv, write_json, write_text
from .dataset import (FeatureTable, IngestConfig, ingest_csv, read_split_manifest,
                      stratified_split, write_csv_table, write_split_manifest)
from .errors import DataError, InputMissingError, SplitGuardError
from .export import (ModelArtifact, emit_expression, load_artifact, load_dialect,
                     save_artifact, write_expression)
from .features import FeatureSpec, candidate_specs, screen_columns
from .linmod import coefficient_importance
from .metrics import pr_auc, pr_curve
from .selection import (importance_screen, permutation_importance, rfe_loop,
                        train_model)
from .synth import default_truth, generate, write_synth

STAGES = ("prepare", "screen", "train-baseline", "engineer", "select", "evaluate",
          "importance", "export")


class Workspace:
    """Output directory plus the split guard for one stage."""

    def __init__(self, config, stage):
        self.config = config
        self.stage = stage
        self.root = Path(config.output_dir)
        self._table = None
        self._split = None
        self.log_lines = [f"stage {stage}", f"config_fingerprint {config.fingerprint()}"]

    def path(self, *parts):
        return self.root.joinpath(*parts)

    def require(self, *parts):
        p = self.path(*parts)
        if not p.is_file():
            raise InputMissingError(f"{self.stage} needs {p}; run the earlier stage first")
        return p

    def log(self, key, value):
        self.log_lines.append(f"{key} {value}")

    def finish(self):
        write_text(self.path("logs", f"{self.stage}.log"), "\n".join(self.log_lines) + "\n")

    @property
    def table(self):
        if self._table is None:
            names = self.read_lines("prepared", "columns.txt")
            data = np.load(self.require("prepared", "data.npy"), allow_pickle=False)
            label = np.load(self.require("prepared", "label.npy"), allow_pickle=False)
            self._table = FeatureTable({nm: data[:, j] for j, nm in enumerate(names)}, label)
        return self._table

    def rows(self, part):
        if part == "test" and self.stage != "evaluate":
            raise SplitGuardError(f"stage {self.stage!r} may not read the test split")
        if self._split is None:
            self.require("splits", "manifest.json")
            self._split = read_split_manifest(self.path("splits"))
        return getattr(self._split, part)

    def read_json(self, *parts):
        return json.loads(self.require(*parts).read_text(encoding="utf-8"))

    def read_lines(self, *parts):
        return [ln for ln in self.require(*parts).read_text(encoding="utf-8").splitlines() if ln]


def _specs_from(data):
    return [FeatureSpec.from_dict(d) for d in data]


def run_synth(config, directory=None):
    sc = config.synth
    truth = default_truth(prevalence=sc.prevalence, mode=sc.mode,
                          distribution=sc.distribution, sigma=sc.sigma)
    table, truth = generate(truth, sc.n, sc.d, sc.seed)
    directory = Path(directory) if directory else Path(config.output_dir) / "synth"
    write_synth(directory, table, truth, config.label.column)
    return directory / "data.csv"


def prepare(config):
    ws = Workspace(config, "prepare")
    if not config.input:
        raise InputMissingError("no input file configured")
    table = ingest_csv(config.input, IngestConfig(label=config.label))
    if table.n_rows == 0:
        raise DataError("input holds no complete rows")
    split = stratified_split(table.label, config.split_seed)
    write_split_manifest(ws.path("splits"), split, table.label)
    names = table.column_names
    # plain .npy files: unlike zip archives they carry no timestamps
    with atomic_open(ws.path("prepared", "data.npy"), "wb") as fh:
        np.save(fh, table.matrix(names))
    with atomic_open(ws.path("prepared", "label.npy"), "wb") as fh:
        np.save(fh, table.label.astype(np.int8))
    write_text(ws.path("prepared", "columns.txt"), "".join(f"{nm}\n" for nm in names))
    ws.log("rows", table.n_rows)
    ws.log("rejected_rows", table.rejected_rows)
    ws.log("positives", int(table.label.sum()))
    for part, idx in split.parts().items():
        ws.log(f"{part}_rows", idx.size)
    ws.finish()
    return split


def screen(config):
    ws = Workspace(config, "screen")
    train = ws.rows("train")
    result = screen_columns(ws.table, config.screen, train)
    imp = importance_screen(ws.table, train, result.retained, config.screen.importance_cutoff,
                            config.train)
    removed = list(result.removed)
    for nm, v in imp.importances.items():
        if nm not in imp.kept:
            removed.append((nm, "low-importance", f"importance={v!r}"))
    write_csv(ws.path("screen", "removal_report.csv"), ["column", "reason", "detail"], removed)
    write_csv(ws.path("screen", "importances.csv"), ["column", "importance", "kept"],
              [(nm, v, int(nm in imp.kept)) for nm, v in imp.importances.items()])
    write_text(ws.path("screen", "base_features.txt"), "".join(f"{nm}\n" for nm in imp.kept))
    ws.log("retained_after_filters", len(result.retained))
    ws.log("kept", len(imp.kept))
    ws.finish()
    return imp.kept


def _metrics(model, table, rows):
    probs = model.predict_proba(table.take(rows))
    y = table.label[rows]
    return probs, {"pr_auc": pr_auc(probs, y), "prevalence": float(y.mean()),
                   "rows": int(rows.size)}


def train_baseline(config):
    ws = Workspace(config, "train-baseline")
    base = ws.read_lines("screen", "base_features.txt")
    model = train_model(ws.table, ws.rows("train"), [FeatureSpec.base(nm) for nm in base],
                        config.train)
    val = ws.rows("validation")
    probs, metrics = _metrics(model, ws.table, val)
    metrics["n_features"] = len(base)
    write_json(ws.path("baseline", "metrics.json"), {"validation": metrics})
    pr_curve(probs, ws.table.label[val]).to_csv(ws.path("baseline", "pr_curve.csv"))
    ws.log("validation_pr_auc", repr(metrics["pr_auc"]))
    ws.finish()
    return metrics


def engineer(config):
    ws = Workspace(config, "engineer")
    base = ws.read_lines("screen", "base_features.txt")
    specs = candidate_specs(base, ws.table, ws.rows("train"))
    write_json(ws.path("engineer", "specs.json"), [s.to_dict() for s in specs])
    ws.log("candidates", len(specs))
    ws.finish()
    return specs


def select(config, progress=None):
    ws = Workspace(config, "select")
    specs = _specs_from(ws.read_json("engineer", "specs.json"))
    table, train = ws.table, ws.rows("train")
    result = rfe_loop(specs, table, train, config.rfe, config.train, progress)
    result.trace.to_csv(ws.path("select", "trace.csv"))
    result.trace.details_to_csv(ws.path("select", "trace_details.csv"))
    write_json(ws.path("select", "final_specs.json"), [s.to_dict() for s in result.selected])
    model = train_model(table, train, result.selected, config.train)
    _, metrics = _metrics(model, table, ws.rows("validation"))
    save_artifact(ModelArtifact(model, config.label, config.fingerprint(),
                                {"validation": metrics}), ws.path("select", "model.json"))
    ws.log("iterations", len(result.trace.iterations))
    ws.log("best_iteration", result.trace.best_iteration)
    ws.log("best_cv_pr_auc", repr(result.trace.best_pr_auc))
    ws.log("selected", ",".join(s.name for s in result.selected))
    ws.finish()
    return result


def evaluate(config):
    """Score the selected model once on the held-out test rows."""
    ws = Workspace(config, "evaluate")
    model = load_artifact(ws.require("select", "model.json")).model
    test = ws.rows("test")
    probs, metrics = _metrics(model, ws.table, test)
    write_json(ws.path("evaluate", "metrics.json"), {"test": metrics})
    pr_curve(probs, ws.table.label[test]).to_csv(ws.path("evaluate", "pr_curve.csv"))
    ws.log("test_pr_auc", repr(metrics["pr_auc"]))
    ws.finish()
    return metrics


def importance(config):
    ws = Workspace(config, "importance")
    model = load_artifact(ws.require("select", "model.json")).model
    pc = config.permutation
    result = permutation_importance(model, ws.table, ws.rows("validation"), pc.repeats, pc.seed)
    result.to_csv(ws.path("importance", "permutation.csv"))
    ws.log("baseline_pr_auc", repr(result.baseline))
    ws.finish()
    return result


def export(config):
    ws = Workspace(config, "export")
    art = load_artifact(ws.require("select", "model.json"))
    metrics = dict(art.metrics)
    test_path = ws.path("evaluate", "metrics.json")
    if test_path.is_file():
        metrics.update(ws.read_json("evaluate", "metrics.json"))
    art = replace(art, metrics=metrics, config_fingerprint=config.fingerprint())
    save_artifact(art, ws.path("export", "model.json"))
    dialect = load_dialect(config.export.dialect, config.export.variables)
    write_expression(ws.path("export", "expression.txt"), emit_expression(art.model, dialect))
    write_final_features(ws.path("export", "final_features.csv"), art.model)
    ws.log("features", art.model.n_features)
    ws.finish()
    return art


def write_final_features(path, model):
    """Manifest of the final specs with coefficients and standardization."""
    sc = model.standardizer
    imp = coefficient_importance(model)
    rows = [(s.name, s.kind, s.name_a, s.name_b, s.shift, float(b), float(mu), float(sd),
             float(w))
            for s, b, mu, sd, w in zip(model.feature_specs, model.coefficients, sc.means_,
                                       sc.stds_, imp)]
    rows.insert(0, ("(intercept)", "", "", None, None, float(model.intercept), None, None, None))
    write_csv(path, ["spec", "kind", "operand_a", "operand_b", "shift", "coefficient",
                     "mean", "std", "importance"], rows)


def predict(artifact_path, input_path, output_path, label_column=None):
    """Append a probability column to a CSV using a saved model."""
    art = load_artifact(artifact_path)
    table = ingest_csv(input_path, IngestConfig(label=art.label_spec, require_label=False))
    probs = art.model.predict_proba(table)
    write_csv_table(output_path, table, label_column or art.label_spec.column,
                    {"thrombus_probability": probs})
    return probs


_RUNNERS = {"prepare": prepare, "screen": screen, "train-baseline": train_baseline,
            "engineer": engineer, "select": select, "evaluate": evaluate,
            "importance": importance, "export": export}


def run_stage(stage, config, **kwargs):
    return _RUNNERS[stage](config, **kwargs)


def run_all(config, progress=None):
    for stage in STAGES:
        if stage == "select":
            select(config, progress)
        else:
            run_stage(stage, config)
    logs = [Path(config.output_dir, "logs", f"{s}.log").read_text(encoding="utf-8")
            for s in STAGES]
    write_text(Path(config.output_dir, "run.log"), "".join(logs))
