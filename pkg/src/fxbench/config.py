"""Declarative benchmark configuration (TOML, versioned schema).

Every section is optional; missing keys fall back to the dataclass
defaults. See ``configs/default.toml`` for the full schema.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import FxBenchError
from .evaluation import VerificationConfig
from .indicators import IndicatorConfig
from .lstm_baselines import TABLE1, TrainConfig
from .paired_ann import AnnPairConfig

SCHEMA_VERSION = 1
DEFAULT_MODELS = ("custom_ann", *TABLE1)


class ConfigError(FxBenchError, ValueError):
    pass


@dataclass(frozen=True)
class DataConfig:
    periods: tuple[str, ...] = ("2021-10", "2021-11", "2021-12")
    files: dict = field(default_factory=dict)  # period label -> TrueFX tick file
    pair: str | None = "EUR/USD"
    price: str = "mid"
    synthetic_length: int = 20000
    synthetic_start: float = 1.15
    synthetic_vol: float = 0.00002
    synthetic_drift: float = 0.0


@dataclass(frozen=True)
class PlanConfig:
    models: tuple[str, ...] = DEFAULT_MODELS
    repetitions: int = 3
    mode: str = "end_to_end"


@dataclass(frozen=True)
class BenchConfig:
    seed: int = 42
    data: DataConfig = field(default_factory=DataConfig)
    plan: PlanConfig = field(default_factory=PlanConfig)
    evaluation: VerificationConfig = field(default_factory=VerificationConfig)
    decimal: str = ","
    indicators: IndicatorConfig = field(default_factory=IndicatorConfig)
    custom_ann: AnnPairConfig = field(default_factory=AnnPairConfig)
    lstm: TrainConfig = field(default_factory=TrainConfig)

    def with_seed(self, seed: int) -> "BenchConfig":
        """Propagate one seed to the data generator and every model."""
        return replace(
            self, seed=seed,
            custom_ann=replace(self.custom_ann, seed=seed),
            lstm=replace(self.lstm, seed=seed),
        )

    def summary_lines(self) -> list[str]:
        return [
            f"seed: {self.seed}",
            f"emission threshold: ann {self.custom_ann.emission_threshold:g}, "
            f"lstm {self.lstm.emission_threshold:g}",
        ]


def _build(cls, section: dict, where: str):
    names = {f.name for f in fields(cls)}
    unknown = set(section) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(unknown)}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in section.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{where}] section: {exc}") from None


def parse_config(doc: dict) -> BenchConfig:
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version} (expected {SCHEMA_VERSION})")
    sections = {
        "data": DataConfig, "plan": PlanConfig, "evaluation": VerificationConfig,
        "indicators": IndicatorConfig, "custom_ann": AnnPairConfig, "lstm": TrainConfig,
    }
    unknown = set(doc) - set(sections) - {"schema_version", "seed", "decimal"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    built = {name: _build(cls, doc.get(name, {}), name) for name, cls in sections.items()}
    cfg = BenchConfig(seed=int(doc.get("seed", 42)), decimal=doc.get("decimal", ","), **built)
    if cfg.decimal not in (",", "."):
        raise ConfigError("decimal must be ',' or '.'")
    unknown_models = [m for m in cfg.plan.models if m not in DEFAULT_MODELS and m != cfg.custom_ann.label]
    if unknown_models:
        raise ConfigError(f"unknown models {unknown_models}; choose from {list(DEFAULT_MODELS)}")
    return cfg.with_seed(cfg.seed)


def load_config(path: str | Path | None) -> BenchConfig:
    if path is None:
        return parse_config({})
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}") from None
    return parse_config(doc)
