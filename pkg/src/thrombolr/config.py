"""Declarative pipeline configuration (YAML or JSON) with flag overrides."""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .dataset import LabelSpec
from .errors import ConfigError, InputMissingError
from .features import ScreenConfig
from .linmod import TrainConfig
from .selection import RfeConfig


@dataclass(frozen=True)
class PermutationConfig:
    repeats: int = 10
    seed: int = 0


@dataclass(frozen=True)
class ExportConfig:
    dialect: str = "default"
    variables: Optional[dict] = None


@dataclass(frozen=True)
class SynthConfig:
    n: int = 200_000
    d: int = 20
    seed: int = 0
    prevalence: float = 0.02
    mode: str = "quantile"
    distribution: str = "lognormal"
    sigma: float = 0.5


_SECTIONS = {
    "label": LabelSpec,
    "screen": ScreenConfig,
    "train": TrainConfig,
    "rfe": RfeConfig,
    "permutation": PermutationConfig,
    "export": ExportConfig,
    "synth": SynthConfig,
}


@dataclass(frozen=True)
class PipelineConfig:
    input: Optional[str] = None
    output_dir: str = "out"
    split_seed: int = 0
    label: LabelSpec = field(default_factory=LabelSpec)
    screen: ScreenConfig = field(default_factory=ScreenConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    rfe: RfeConfig = field(default_factory=RfeConfig)
    permutation: PermutationConfig = field(default_factory=PermutationConfig)
    export: ExportConfig = field(default_factory=ExportConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["screen"]["exclusion_patterns"] = list(self.screen.exclusion_patterns)
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        try:
            for key, value in data.items():
                if key in _SECTIONS:
                    if not isinstance(value, dict):
                        raise ConfigError(f"config section {key!r} must be a mapping")
                    kwargs[key] = _SECTIONS[key](**value)
                else:
                    kwargs[key] = value
            cfg = cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"invalid config: {exc}") from None
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None
        if not isinstance(cfg.split_seed, int):
            raise ConfigError("split_seed must be an integer")
        return cfg

    def fingerprint(self):
        """SHA-256 of the canonical config, ignoring where outputs are written."""
        data = self.to_dict()
        data.pop("output_dir")
        text = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _parse_scalar(text):
    # YAML scalar rules: 3 -> int, 0.5 -> float, true -> bool, [a, b] -> list
    return yaml.safe_load(text)


def apply_overrides(data, overrides):
    """Apply ``section.key=value`` strings to a nested config mapping."""
    data = json.loads(json.dumps(data))
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a scalar")
        node[parts[-1]] = _parse_scalar(value)
    return data


def read_config_file(path):
    path = Path(path)
    if not path.is_file():
        raise InputMissingError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping at top level")
    return data


def load_config(path=None, overrides=()):
    """Build a :class:`PipelineConfig` from an optional file plus overrides.

    JSON is read through the YAML loader, which accepts it as a subset.
    """
    data = read_config_file(path) if path else {}
    return PipelineConfig.from_dict(apply_overrides(data, overrides))
