"""Experiment configuration: nested dataclasses with validated defaults.

A config round-trips through plain dicts (``to_dict`` / ``from_dict``) so
it can be loaded from a JSON file and embedded verbatim in every report.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path

REPORT_DIR_ENV = "MVTRUST_REPORT_DIR"
ABLATIONS = ("full", "v1-no-oversample", "v2-random-weights")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


@dataclass(frozen=True)
class DataSection:
    manifest: str | None = None
    train_fraction: float = 0.8
    normalize: bool = True

    def validate(self):
        _require(0 < self.train_fraction < 1, "data.train_fraction must be in (0, 1)")


@dataclass(frozen=True)
class NetworkSection:
    hidden: int = 64
    epochs: int = 200
    lr: float = 1e-3
    batch_size: int = 64
    optimizer: str = "adam"
    early_stop: bool = False

    def validate(self):
        _require(self.hidden >= 1, "network.hidden must be >= 1")
        _require(self.epochs >= 1, "network.epochs must be >= 1")
        _require(self.lr > 0, "network.lr must be positive")
        _require(self.batch_size >= 1, "network.batch_size must be >= 1")
        _require(self.optimizer in ("adam", "sgd"), "network.optimizer must be 'adam' or 'sgd'")


@dataclass(frozen=True)
class LossSection:
    anneal_epochs: int = 10
    per_view_loss: bool = True
    reduction: str = "mean"

    def validate(self):
        _require(self.anneal_epochs >= 1, "loss.anneal_epochs must be >= 1")
        _require(self.reduction in ("mean", "sum"), "loss.reduction must be 'mean' or 'sum'")


@dataclass(frozen=True)
class OversampleSection:
    n_neighbors: int = 3
    transform: str = "inverse"
    target: str = "max"
    ablation: str = "full"
    warm_start: bool = False

    def validate(self):
        _require(self.n_neighbors >= 1, "oversample.n_neighbors must be >= 1")
        _require(self.transform == "inverse", "oversample.transform must be 'inverse'")
        _require(self.target == "max" or str(self.target).isdigit(),
                 "oversample.target must be 'max' or a positive integer")
        _require(self.ablation in ABLATIONS, f"oversample.ablation must be one of {ABLATIONS}")

    def target_count(self) -> int | None:
        return None if self.target == "max" else int(self.target)


@dataclass(frozen=True)
class LongTailSection:
    eta: float = 0.3
    decay_form: str = "normalized-exponent"
    min_per_class: int = 2
    enabled: bool = True

    def validate(self):
        _require(0 < self.eta <= 1, "long_tail.eta must be in (0, 1]")
        _require(self.decay_form in ("normalized-exponent", "geometric-per-class"),
                 "long_tail.decay_form must be 'normalized-exponent' or 'geometric-per-class'")
        _require(self.min_per_class >= 0, "long_tail.min_per_class must be >= 0")


@dataclass(frozen=True)
class NoiseSection:
    kind: str = "none"
    sigma: float = 0.0
    fraction: float = 1.0

    def validate(self):
        _require(self.kind in ("none", "gaussian", "conflictive"),
                 "noise.kind must be 'none', 'gaussian' or 'conflictive'")
        _require(self.sigma >= 0, "noise.sigma must be >= 0")
        _require(0 <= self.fraction <= 1, "noise.fraction must be in [0, 1]")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    data: DataSection = field(default_factory=DataSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    loss: LossSection = field(default_factory=LossSection)
    oversample: OversampleSection = field(default_factory=OversampleSection)
    long_tail: LongTailSection = field(default_factory=LongTailSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    report_dir: str | None = None

    def validate(self) -> "ExperimentConfig":
        _require(isinstance(self.seed, int) and self.seed >= 0, "seed must be a nonnegative integer")
        for f in fields(self):
            value = getattr(self, f.name)
            if is_dataclass(value):
                value.validate()
        return self

    def resolved_report_dir(self) -> Path:
        return Path(self.report_dir or os.environ.get(REPORT_DIR_ENV) or "reports")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d or {})
        kwargs = {}
        for name, section_cls in _SECTIONS.items():
            if name in d:
                kwargs[name] = _section_from_dict(section_cls, d.pop(name), name)
        for name in ("seed", "report_dir"):
            if name in d:
                kwargs[name] = d.pop(name)
        _require(not d, f"unknown config fields: {sorted(d)}")
        return cls(**kwargs).validate()

    def override(self, dotted: dict) -> "ExperimentConfig":
        """Apply ``{"network.epochs": 5, "seed": 1}`` style overrides; ``None`` values are skipped."""
        cfg = self
        for key, value in dotted.items():
            if value is None:
                continue
            if "." in key:
                section, name = key.split(".", 1)
                sub = getattr(cfg, section)
                _require(name in {f.name for f in fields(sub)}, f"unknown config field {key}")
                cfg = replace(cfg, **{section: replace(sub, **{name: value})})
            else:
                _require(key in {f.name for f in fields(cfg)}, f"unknown config field {key}")
                cfg = replace(cfg, **{key: value})
        return cfg.validate()


_SECTIONS = {"data": DataSection, "network": NetworkSection, "loss": LossSection,
             "oversample": OversampleSection, "long_tail": LongTailSection, "noise": NoiseSection}


def _section_from_dict(section_cls, value, name: str):
    _require(isinstance(value, dict), f"config section {name} must be an object")
    known = {f.name for f in fields(section_cls)}
    unknown = set(value) - known
    _require(not unknown, f"unknown fields in {name}: {sorted(unknown)}")
    return section_cls(**value)


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    try:
        return ExperimentConfig.from_dict(raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
