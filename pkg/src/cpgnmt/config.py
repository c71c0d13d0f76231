"""Experiment configuration: YAML files mapped onto nested dataclasses."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError, PathError
from .inference import DecodeConfig
from .model import ModelConfig
from .training import TrainingSchedule, VocabConfig


@dataclass
class CountConfig:
    """Abstract network sizes for closed-form parameter counting.

    ``encoder_groups`` and ``decoder_groups`` map group names to their scalar
    counts; each language owns a word table of ``vocab_size x word_size`` and
    a projection of ``hidden_size x vocab_size``.
    """

    languages: int = 3
    vocab_size: int = 10
    word_size: int = 4
    hidden_size: int = 4
    embedding_size: int = 8
    group_rank: int | None = None
    encoder_groups: dict[str, int] = field(default_factory=lambda: {"encoder": 40})
    decoder_groups: dict[str, int] = field(default_factory=lambda: {"decoder": 60})


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainingSchedule = field(default_factory=TrainingSchedule)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    vocabulary: VocabConfig = field(default_factory=VocabConfig)
    manifest: str | None = None
    output_dir: str = "runs/default"
    seed: int = 0
    count: CountConfig | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {
    "model": ModelConfig,
    "training": TrainingSchedule,
    "decode": DecodeConfig,
    "vocabulary": VocabConfig,
    "count": CountConfig,
}


def _build(cls, raw: Any, section: str):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config section {section!r} must be a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in names:
            raise ConfigError(f"unknown config field {section}.{key}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"invalid config section {section!r}: {exc}") from None


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    top = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in raw:
        if key not in top:
            raise ConfigError(f"unknown config field {key}")
    kwargs = {}
    for key, value in raw.items():
        if key in _SECTIONS:
            if key == "count" and value is None:
                kwargs[key] = None
            else:
                kwargs[key] = _build(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    cfg = ExperimentConfig(**kwargs)
    # the top-level seed wins; a seed given only under training is promoted
    if "seed" not in raw:
        cfg.seed = cfg.training.seed
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigError("config field seed must be a non-negative integer")
    cfg.training.seed = cfg.seed
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise PathError(f"config not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({str(exc).splitlines()[0]})") from None
    cfg = config_from_dict(raw)
    if cfg.manifest is not None and not Path(cfg.manifest).is_absolute():
        cfg.manifest = str(path.parent / cfg.manifest)
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def apply_overrides(
    cfg: ExperimentConfig,
    *,
    seed: int | None = None,
    variant: str | None = None,
    parallel_fraction: float | None = None,
    autoencode: bool | None = None,
    manifest: str | None = None,
) -> ExperimentConfig:
    """Return a copy with command-line overrides applied and revalidated."""
    raw = cfg.to_dict()
    if seed is not None:
        raw["seed"] = seed
    if variant is not None:
        raw["model"]["variant"] = variant
    if parallel_fraction is not None:
        raw["training"]["parallel_fraction"] = parallel_fraction
    if autoencode is not None:
        raw["training"]["autoencode"] = autoencode
    if manifest is not None:
        raw["manifest"] = manifest
    return config_from_dict(raw)
