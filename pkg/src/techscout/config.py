"""Run configuration: defaults, JSON config files, and flag overrides.

A run is fully described by one RunConfig. Configs load from a single JSON
document and command-line flags override individual fields, so every run
report can reproduce the run that wrote it.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .embedding import DEFAULT_HASH_DIM, DEFAULT_TARGET_DIM
from .labeling import DEFAULT_LABELS
from .topics import (
    DEFAULT_KEYWORDS_PER_TOPIC,
    DEFAULT_MAX_TOPICS,
    DEFAULT_MIN_PTS,
    DEFAULT_MMR_LAMBDA,
    TopicConfig,
)

PROVIDER_URL_ENV = "DITTO_PROVIDER_URL"

SCORER_KINDS = ("stored", "keyword")
FIT_SCOPES = ("ai", "all")
DEFAULT_WINDOW = (2019, 2023)


class ConfigError(Exception):
    """Raised for an invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    """Everything a pipeline run needs, serialized into the run report."""

    input_path: str = ""
    input_format: str = "csv"
    label_names: tuple[str, ...] = DEFAULT_LABELS.names
    fallback_label: str = DEFAULT_LABELS.fallback
    gamma: float = 0.5
    scorer_kind: str = "stored"
    scorer_path: str | None = None
    keyword_rules: dict[str, list[str]] = field(default_factory=dict)
    provider_url: str | None = None
    hash_dim: int = DEFAULT_HASH_DIM
    target_dim: int = DEFAULT_TARGET_DIM
    eps: float | None = None
    min_pts: int = DEFAULT_MIN_PTS
    mmr_lambda: float = DEFAULT_MMR_LAMBDA
    keywords_per_topic: int = DEFAULT_KEYWORDS_PER_TOPIC
    max_topics: int = DEFAULT_MAX_TOPICS
    fit_scope: str = "ai"
    window: tuple[int, int] = DEFAULT_WINDOW
    min_count: float | None = None
    seed: int = 0
    use_chat: bool = True
    out_dir: str = "out"

    def validate(self) -> None:
        if not self.input_path:
            raise ConfigError("input_path is required")
        if self.input_format not in ("csv", "jsonl"):
            raise ConfigError(f"unknown input format {self.input_format!r}")
        if not self.label_names:
            raise ConfigError("at least one label name is required")
        if self.fallback_label in self.label_names:
            raise ConfigError("fallback label must not collide with label names")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.scorer_kind not in SCORER_KINDS:
            raise ConfigError(f"scorer kind must be one of {SCORER_KINDS}")
        if self.scorer_kind == "stored" and not self.scorer_path:
            raise ConfigError("stored scorer requires scorer_path")
        if self.fit_scope not in FIT_SCOPES:
            raise ConfigError(f"fit scope must be one of {FIT_SCOPES}")
        y_start, y_end = self.window
        if y_start > y_end:
            raise ConfigError(f"window start {y_start} after end {y_end}")
        if self.eps is not None and self.eps <= 0:
            raise ConfigError("eps must be positive when given")
        if self.min_pts < 1:
            raise ConfigError("min_pts must be at least 1")
        if not 0.0 <= self.mmr_lambda <= 1.0:
            raise ConfigError("mmr_lambda must lie in [0, 1]")
        if self.keywords_per_topic < 1:
            raise ConfigError("keywords_per_topic must be at least 1")
        if self.max_topics < 1:
            raise ConfigError("max_topics must be at least 1")
        if self.target_dim < 1:
            raise ConfigError("target_dim must be at least 1")
        if self.hash_dim < 2:
            raise ConfigError("hash_dim must be at least 2")

    def topic_config(self) -> TopicConfig:
        return TopicConfig(
            target_dim=self.target_dim,
            eps=self.eps,
            min_pts=self.min_pts,
            mmr_lambda=self.mmr_lambda,
            k=self.keywords_per_topic,
            max_topics=self.max_topics,
            seed=self.seed,
        )

    def resolved_provider_url(self) -> str | None:
        """Explicit URL if set, else the environment fallback."""
        if self.provider_url:
            return self.provider_url
        return os.environ.get(PROVIDER_URL_ENV) or None

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["label_names"] = list(self.label_names)
        data["window"] = list(self.window)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = dict(data)
        if "label_names" in merged:
            merged["label_names"] = tuple(merged["label_names"])
        if "window" in merged:
            window = merged["window"]
            if len(window) != 2:
                raise ConfigError("window must be [start_year, end_year]")
            merged["window"] = (int(window[0]), int(window[1]))
        config = cls(**merged)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        file_path = Path(path)
        try:
            data = json.loads(file_path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {file_path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {file_path} is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        file_path = Path(path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        file_path.write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
