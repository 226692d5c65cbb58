"""Pydantic v2 models for hiercl records, configs and reports."""

from __future__ import annotations

import math
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from hiercl.constants import (
    DEFAULT_BATCH_PATENTS,
    DEFAULT_D_IN,
    DEFAULT_EMBED_DIM,
    DEFAULT_HIDDEN_DIM,
    DEFAULT_IMAGES_PER_PATENT,
    DEFAULT_LAMBDA,
    DEFAULT_LR,
    DEFAULT_MAIN_CLASSES,
    DEFAULT_MAX_EPOCHS,
    DEFAULT_NOISE_PROB,
    DEFAULT_NOISE_SIGMA,
    DEFAULT_NUM_LAYERS,
    DEFAULT_PATENTS_PER_SUBCLASS,
    DEFAULT_PATIENCE,
    DEFAULT_QUERIES_PER_PATENT,
    DEFAULT_S_MAIN,
    DEFAULT_S_PATENT,
    DEFAULT_S_SUBCLASS,
    DEFAULT_SPLIT_RATIOS,
    DEFAULT_SPREAD_IMAGE,
    DEFAULT_SPREAD_MAIN,
    DEFAULT_SPREAD_PATENT,
    DEFAULT_SPREAD_SUB,
    DEFAULT_SUBCLASSES_PER_MAIN,
    DEFAULT_TAU,
    DEFAULT_WEIGHT_DECAY,
    DESK_BATCH_PATENTS,
    DESK_EMBED_DIM,
    DESK_LR,
    DESK_MAX_EPOCHS,
    DESK_PATIENCE,
    FIRST_MAIN_CLASS,
    TEXT_FEATURE_DIM,
)

# ---------------------------------------------------------------------------
# Taxonomy
# ---------------------------------------------------------------------------


class HierLevel(str, Enum):
    """Hierarchy levels, ordered fine to coarse."""

    PATENT_ID = "patent_id"
    SUBCLASS = "subclass"
    MAIN_CLASS = "main_class"


class HierLabel(BaseModel):
    """Position of an image in the main class / subclass / patent hierarchy."""

    model_config = ConfigDict(frozen=True)

    main_class: int = Field(..., ge=0)
    subclass: int = Field(..., ge=0)
    patent_id: str = Field(..., min_length=1)

    @model_validator(mode="after")
    def validate_prefix(self) -> HierLabel:
        if self.subclass // 100 != self.main_class:
            raise ValueError(
                f"Subclass {self.subclass} does not belong to main class {self.main_class}."
            )
        return self


class ScoreConfig(BaseModel):
    """Relevance scalars for same patent, same subclass and same main class.

    Zeros switch a coarse level off; among non-zero levels the ordering
    ``s_p > s_s > s_m`` is enforced.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    s_p: float = Field(default=DEFAULT_S_PATENT, gt=0.0)
    s_s: float = Field(default=DEFAULT_S_SUBCLASS, ge=0.0)
    s_m: float = Field(default=DEFAULT_S_MAIN, ge=0.0)

    @model_validator(mode="after")
    def validate_ordering(self) -> ScoreConfig:
        if not self.s_p > self.s_s:
            raise ValueError(f"s_p ({self.s_p}) must exceed s_s ({self.s_s}).")
        if self.s_m > 0.0 and not self.s_s > self.s_m:
            raise ValueError(f"s_s ({self.s_s}) must exceed s_m ({self.s_m}).")
        return self


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------


class ImageRecord(BaseModel):
    """One image: its label, feature vector and optional object name."""

    model_config = ConfigDict(frozen=True)

    image_id: str = Field(..., min_length=1)
    label: HierLabel
    features: tuple[float, ...] = Field(..., min_length=1)
    text: Optional[str] = None

    @field_validator("features")
    @classmethod
    def validate_features(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if not all(math.isfinite(x) for x in v):
            raise ValueError("features must be finite.")
        if not any(x != 0.0 for x in v):
            raise ValueError("features must not be the zero vector.")
        return v

    @property
    def patent_id(self) -> str:
        return self.label.patent_id


class SplitSpec(BaseModel):
    """Patent-level train/val/test partition."""

    model_config = ConfigDict(frozen=True)

    train: list[str]
    val: list[str]
    test: list[str]
    seed: int = Field(default=0, ge=0)
    ratios: tuple[float, float, float] = DEFAULT_SPLIT_RATIOS

    @model_validator(mode="after")
    def validate_disjoint(self) -> SplitSpec:
        train, val, test = set(self.train), set(self.val), set(self.test)
        if len(train) != len(self.train) or len(val) != len(self.val) or len(test) != len(
            self.test
        ):
            raise ValueError("A split lists the same patent twice.")
        if train & val or train & test or val & test:
            raise ValueError("Splits must be disjoint at patent level.")
        return self


class SyntheticSpec(BaseModel):
    """Nested Gaussian generative model for a desk-scale hierarchical corpus."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    main_classes: int = Field(default=DEFAULT_MAIN_CLASSES, ge=1, le=100 - FIRST_MAIN_CLASS)
    subclasses_per_main: int = Field(default=DEFAULT_SUBCLASSES_PER_MAIN, ge=1, le=99)
    patents_per_subclass: int = Field(default=DEFAULT_PATENTS_PER_SUBCLASS, ge=1)
    images_per_patent: int = Field(default=DEFAULT_IMAGES_PER_PATENT, ge=2)
    d_in: int = Field(default=DEFAULT_D_IN, ge=1)
    spread_main: float = Field(default=DEFAULT_SPREAD_MAIN, gt=0.0)
    spread_sub: float = Field(default=DEFAULT_SPREAD_SUB, gt=0.0)
    spread_patent: float = Field(default=DEFAULT_SPREAD_PATENT, ge=0.0)
    spread_image: float = Field(default=DEFAULT_SPREAD_IMAGE, ge=0.0)
    seed: int = Field(default=0, ge=0)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


class LossMode(str, Enum):
    """Training objective: single-positive or hierarchical multi-positive."""

    CL = "cl"
    HMCL = "hmcl"


class TrainConfig(BaseModel):
    """Hyperparameters of one training run."""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    lr: float = Field(default=DEFAULT_LR, ge=0.0)
    weight_decay: float = Field(default=DEFAULT_WEIGHT_DECAY, ge=0.0)
    tau: float = Field(default=DEFAULT_TAU, gt=0.0)
    lambda_: float = Field(default=DEFAULT_LAMBDA, ge=0.0, alias="lambda")
    batch_size: int = Field(default=DEFAULT_BATCH_PATENTS, ge=2)
    max_epochs: int = Field(default=DEFAULT_MAX_EPOCHS, ge=1)
    patience: int = Field(default=DEFAULT_PATIENCE, ge=1)
    seed: int = Field(default=0, ge=0)
    loss_mode: LossMode = LossMode.HMCL
    scores: ScoreConfig = Field(default_factory=ScoreConfig)
    use_text: bool = False
    symmetric: bool = False
    embed_dim: int = Field(default=DEFAULT_EMBED_DIM, ge=1)
    num_layers: int = Field(default=DEFAULT_NUM_LAYERS, ge=1, le=2)
    hidden_dim: int = Field(default=DEFAULT_HIDDEN_DIM, ge=1)
    noise_prob: float = Field(default=DEFAULT_NOISE_PROB, ge=0.0, le=1.0)
    noise_sigma: float = Field(default=DEFAULT_NOISE_SIGMA, ge=0.0)
    queries_per_patent: int = Field(default=DEFAULT_QUERIES_PER_PATENT, ge=1)
    text_dim: int = Field(default=TEXT_FEATURE_DIM, ge=1)

    @classmethod
    def desk_scale(cls, **overrides: object) -> TrainConfig:
        """Settings that train in a few seconds on the default synthetic corpus.

        Batches of 16 patents give several AdamW steps per epoch, and the
        16-dimensional embedding is half the synthetic input size.
        """
        values: dict[str, object] = {
            "lr": DESK_LR,
            "batch_size": DESK_BATCH_PATENTS,
            "embed_dim": DESK_EMBED_DIM,
            "max_epochs": DESK_MAX_EPOCHS,
            "patience": DESK_PATIENCE,
        }
        values.update(overrides)
        return cls.model_validate(values)


class EpochLog(BaseModel):
    """One line of the training log."""

    epoch: int
    mean_loss: float
    val_map: Optional[float] = None
    best: bool = False


class TrainingLog(BaseModel):
    """Per-epoch history of a training run."""

    epochs: list[EpochLog] = Field(default_factory=list)
    best_epoch: Optional[int] = None
    stopped_early: bool = False

    @property
    def best_val_map(self) -> Optional[float]:
        for entry in self.epochs:
            if entry.epoch == self.best_epoch:
                return entry.val_map
        return None


# ---------------------------------------------------------------------------
# Evaluation reports
# ---------------------------------------------------------------------------


def _check_unit_interval(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0 + 1e-12):
        raise ValueError(f"{name} must lie in [0, 1], got {value}.")


class LevelMetrics(BaseModel):
    """Mean retrieval metrics at one hierarchy level."""

    map: float
    ndcg: float
    mrr: dict[int, float]
    acc: dict[int, float]
    query_count: int = Field(..., ge=0)
    excluded_queries: int = Field(default=0, ge=0)
    mean_relevant: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def validate_ranges(self) -> LevelMetrics:
        _check_unit_interval("map", self.map)
        _check_unit_interval("ndcg", self.ndcg)
        for k, v in self.mrr.items():
            _check_unit_interval(f"mrr@{k}", v)
        for k, v in self.acc.items():
            _check_unit_interval(f"acc@{k}", v)
        return self


class MetricsReport(BaseModel):
    """Per-level mAP, nDCG, MRR@K and Acc@K of a query set against a database."""

    ks: list[int]
    query_count: int
    database_size: int
    levels: dict[HierLevel, LevelMetrics]
    graded_ndcg: Optional[float] = None


class Method(str, Enum):
    """Rows of a comparison table."""

    BASELINE = "Baseline"
    CL = "CL"
    HMCL = "HMCL"
    HMCL_TEXT = "HMCL+text"


class ComparisonRow(BaseModel):
    """Mean and spread of one metric across seeds."""

    method: Method
    level: HierLevel
    metric: str
    k: Optional[int] = None
    mean: float
    std: float = Field(..., ge=0.0)
    seeds: int = Field(..., ge=1)


class ProjectionRow(BaseModel):
    """One record projected onto the first two principal components."""

    x: float
    y: float
    subclass: int
    main_class: int
    image_id: str
