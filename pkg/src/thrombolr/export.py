"""Model artifacts and closed-form expression export.

An artifact is a JSON document ``{"format_version", "checksum", "payload"}``
where ``checksum`` is the SHA-256 of the canonical payload encoding. Floats
go through ``repr``, the shortest decimal that round-trips, so loading
restores every float64 bit for bit.
"""

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from ._io import write_text
from .dataset import LabelSpec
from .errors import (ArtifactError, ChecksumError, ExpressionError,
                     InputMissingError, VersionMismatchError)
from .features import FeatureSpec
from .linmod import LogisticModel, Standardizer

FORMAT_VERSION = 1
POWER_SYNTAXES = ("^", "**", "mul")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*\Z")


@dataclass(frozen=True)
class ModelArtifact:
    model: LogisticModel
    label_spec: LabelSpec = field(default_factory=LabelSpec)
    config_fingerprint: str = ""
    metrics: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION


def _model_payload(model):
    sc = model.standardizer
    return {
        "intercept": float(model.intercept),
        "coefficients": [float(v) for v in model.coefficients],
        "feature_specs": [s.to_dict() for s in model.feature_specs],
        "standardizer": {"means": [float(v) for v in sc.means_],
                         "stds": [float(v) for v in sc.stds_],
                         "fitted_on": int(sc.fitted_on_)},
    }


def _model_from_payload(data):
    sc = data["standardizer"]
    scaler = Standardizer.from_params(sc["means"], sc["stds"], sc["fitted_on"])
    specs = tuple(FeatureSpec.from_dict(s) for s in data["feature_specs"])
    return LogisticModel(float(data["intercept"]),
                         np.array(data["coefficients"], dtype=np.float64), specs, scaler)


def _canonical(payload):
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _checksum(payload):
    return "sha256:" + hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()


def artifact_to_json(artifact):
    payload = {
        "model": _model_payload(artifact.model),
        "label_spec": artifact.label_spec.to_dict(),
        "config_fingerprint": artifact.config_fingerprint,
        "metrics": artifact.metrics,
        "metadata": {"package_version": __version__, **artifact.metadata},
    }
    doc = {"format_version": artifact.format_version, "checksum": _checksum(payload),
           "payload": payload}
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def artifact_from_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"artifact is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or not {"format_version", "checksum", "payload"} <= doc.keys():
        raise ArtifactError("artifact lacks format_version, checksum or payload")
    if doc["format_version"] != FORMAT_VERSION:
        raise VersionMismatchError(
            f"artifact format_version {doc['format_version']!r}, expected {FORMAT_VERSION}")
    payload = doc["payload"]
    if _checksum(payload) != doc["checksum"]:
        raise ChecksumError("artifact checksum does not match its payload")
    try:
        return ModelArtifact(
            model=_model_from_payload(payload["model"]),
            label_spec=LabelSpec(**payload["label_spec"]),
            config_fingerprint=payload["config_fingerprint"],
            metrics=payload["metrics"],
            metadata=payload["metadata"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"artifact payload malformed: {exc}") from None


def save_artifact(artifact, path):
    write_text(path, artifact_to_json(artifact))


def load_artifact(path):
    path = Path(path)
    if not path.is_file():
        raise InputMissingError(f"artifact not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise ArtifactError(f"artifact is not UTF-8 text: {path}") from None
    return artifact_from_json(text)


@dataclass(frozen=True)
class ExpressionDialect:
    """Solver expression grammar.

    Parameters
    ----------
    exp_name, ln_name : str
        Function names for the exponential and natural logarithm.
    power : {"^", "**", "mul"}
        How squares are written; ``"mul"`` writes ``(x*x)``.
    variables : dict, optional
        Base column name to solver variable token. Without a mapping, names
        that are already valid identifiers stand for themselves.
    """

    exp_name: str = "exp"
    ln_name: str = "ln"
    power: str = "^"
    variables: Optional[dict] = None

    def __post_init__(self):
        if self.power not in POWER_SYNTAXES:
            raise ExpressionError(f"power syntax must be one of {POWER_SYNTAXES}")
        for name in (self.exp_name, self.ln_name):
            if not _IDENT.match(name):
                raise ExpressionError(f"function name {name!r} is not an identifier")
        for token in (self.variables or {}).values():
            if not _IDENT.match(token):
                raise ExpressionError(f"variable token {token!r} is not an identifier")

    def token(self, name):
        if self.variables is not None:
            if name not in self.variables:
                raise ExpressionError(f"dialect has no variable mapping for {name!r}")
            return self.variables[name]
        if not _IDENT.match(name):
            raise ExpressionError(f"column {name!r} needs an explicit variable mapping")
        return name

    def to_dict(self):
        out = {"exp_name": self.exp_name, "ln_name": self.ln_name, "power": self.power}
        if self.variables is not None:
            out["variables"] = dict(self.variables)
        return out

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


PROFILES = {
    "default": ExpressionDialect(),
    "cfx": ExpressionDialect(ln_name="loge"),
    "python": ExpressionDialect(ln_name="log", power="**"),
}


def load_dialect(profile="default", variables=None):
    """Dialect from a built-in profile name or a JSON profile file."""
    if profile in PROFILES:
        base = PROFILES[profile].to_dict()
    else:
        path = Path(profile)
        if not path.is_file():
            raise InputMissingError(f"dialect profile not found: {profile}")
        try:
            base = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ExpressionError(f"dialect profile is not valid JSON: {exc}") from None
        if not isinstance(base, dict) or not set(base) <= {"exp_name", "ln_name", "power", "variables"}:
            raise ExpressionError("dialect profile has unknown fields")
    if variables is not None:
        base["variables"] = {**(base.get("variables") or {}), **variables}
    return ExpressionDialect.from_dict(base)


def _lit(value):
    text = repr(float(value))
    if not np.isfinite(value):
        raise ExpressionError(f"cannot emit non-finite literal {text}")
    return f"({text})" if value < 0 else text


def _transform(spec, dialect):
    a = dialect.token(spec.name_a)
    if spec.kind == "Base":
        return a
    if spec.kind == "SQ":
        return f"({a}*{a})" if dialect.power == "mul" else f"{a}{dialect.power}2"
    if spec.kind == "LOG":
        return f"{dialect.ln_name}({a}+{_lit(spec.shift)})"
    return f"({a}*{dialect.token(spec.name_b)})"


def linear_predictor_text(model, dialect=None):
    dialect = dialect or ExpressionDialect()
    sc = model.standardizer
    terms = [_lit(model.intercept)]
    for spec, beta, mu, sd in zip(model.feature_specs, model.coefficients, sc.means_, sc.stds_):
        terms.append(f"{_lit(beta)}*(({_transform(spec, dialect)}-{_lit(mu)})/{_lit(sd)})")
    return "+".join(terms)


def emit_expression(model, dialect=None):
    """Probability expression ``1/(1+exp(-(z)))`` over raw solver variables.

    Standardization and each transform are inlined, so the text needs only
    the base columns. Output is deterministic for a given model and dialect.
    """
    dialect = dialect or ExpressionDialect()
    z = linear_predictor_text(model, dialect)
    return f"1/(1+{dialect.exp_name}(-({z})))"


def write_expression(path, text):
    write_text(path, text.rstrip("\n") + "\n")


def expression_bindings(model, table, dialect=None):
    """Map solver tokens to the table columns the expression reads."""
    dialect = dialect or ExpressionDialect()
    names = sorted({n for s in model.feature_specs for n in s.base_names})
    return {dialect.token(n): table.columns[n] for n in names}
