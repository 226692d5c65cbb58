"""Run configuration: a JSON manifest merged with command-line overrides."""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Optional

import pydantic
from pydantic import BaseModel, ConfigDict, Field, field_validator

from hiercl._utils import PathLike
from hiercl.constants import DEFAULT_KS, DEFAULT_SPLIT_RATIOS
from hiercl.data import check_ratios
from hiercl.exceptions import ConfigError, ValidationError
from hiercl.models import SyntheticSpec, TrainConfig

logger = logging.getLogger("hiercl")

DEFAULT_COMPARISON_SEEDS = (1, 2, 3, 4, 5)


def deep_merge(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    """Recursively merge ``overrides`` into ``base``; override values win."""
    merged: dict[str, Any] = dict(base)
    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class RunConfig(BaseModel):
    """Everything one command needs: hyperparameters, generator spec, seeds and paths.

    The top-level ``seed`` is stamped into the training config and the
    synthetic spec, so one value controls every random stream of a run.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(default=0, ge=0)
    train: TrainConfig = Field(default_factory=TrainConfig)
    synthetic: SyntheticSpec = Field(default_factory=SyntheticSpec)
    ratios: tuple[float, float, float] = DEFAULT_SPLIT_RATIOS
    ks: tuple[int, ...] = DEFAULT_KS
    seeds: tuple[int, ...] = DEFAULT_COMPARISON_SEEDS
    queries_per_patent: Optional[int] = Field(default=None, ge=1)
    with_text: bool = False
    data: Optional[str] = None
    split: Optional[str] = None
    checkpoint: Optional[str] = None
    out: Optional[str] = None

    @field_validator("ratios")
    @classmethod
    def validate_ratios(cls, v: tuple[float, float, float]) -> tuple[float, float, float]:
        return check_ratios(v)

    @field_validator("ks", "seeds")
    @classmethod
    def validate_non_empty(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if not v:
            raise ValueError("must list at least one value.")
        if any(x < 0 for x in v):
            raise ValueError("values must be non-negative.")
        return v

    @classmethod
    def from_file(
        cls, path: Optional[PathLike] = None, overrides: Optional[Mapping[str, Any]] = None
    ) -> RunConfig:
        """Load ``path`` (if given) and apply ``overrides`` on top.

        Raises:
            ConfigError: Unreadable file or non-object JSON.
            ValidationError: A value fails validation.
        """
        base: dict[str, Any] = {}
        if path is not None:
            p = Path(path)
            try:
                loaded = json.loads(p.read_text(encoding="utf-8"))
            except FileNotFoundError:
                raise ConfigError(message=f"config file '{p}' does not exist.") from None
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(message=f"config file '{p}' is unreadable: {exc}") from None
            if not isinstance(loaded, dict):
                raise ConfigError(message=f"config file '{p}' must hold a JSON object.")
            base = loaded
            logger.info("Loaded config from %s.", p)
        merged = deep_merge(base, overrides or {})
        try:
            return cls.model_validate(merged)
        except pydantic.ValidationError as exc:
            err = exc.errors()[0]
            where = ".".join(str(part) for part in err.get("loc", ()))
            raise ValidationError(message=f"{where}: {err.get('msg', exc)}") from None

    def train_config(self) -> TrainConfig:
        update: dict[str, Any] = {"seed": self.seed}
        if self.queries_per_patent is not None:
            update["queries_per_patent"] = self.queries_per_patent
        return self.train.model_copy(update=update)

    def synthetic_spec(self) -> SyntheticSpec:
        return self.synthetic.model_copy(update={"seed": self.seed})

    def require(self, name: str) -> str:
        """Return the path field ``name`` or raise if it was never set."""
        value = getattr(self, name)
        if not value:
            raise ConfigError(message=f"--{name} is required (flag or config file).")
        return str(value)
