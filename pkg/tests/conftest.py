"""Shared factories, fixtures and numerical helpers for hiercl tests."""

from __future__ import annotations

import json
from typing import Any, Callable

import numpy as np
import pytest

from hiercl.data import Dataset, generate_synthetic, split_by_patent
from hiercl.models import HierLabel, ImageRecord, SplitSpec, SyntheticSpec, TrainConfig
from hiercl.trainer import TrainResult, train

# ---------------------------------------------------------------------------
# Sample data factories
# ---------------------------------------------------------------------------


def make_label(**overrides: Any) -> HierLabel:
    defaults: dict[str, Any] = {
        "main_class": 14,
        "subclass": 1402,
        "patent_id": "1402-001",
    }
    defaults.update(overrides)
    return HierLabel(**defaults)


def make_record_dict(**overrides: Any) -> dict[str, Any]:
    """One JSONL line of a dataset file."""
    defaults: dict[str, Any] = {
        "image_id": "1402-001-1",
        "patent_id": "1402-001",
        "subclass": 1402,
        "main_class": 14,
        "features": [0.5, -1.0, 2.0],
        "text": "seat-1402",
    }
    defaults.update(overrides)
    return defaults


def make_record(
    image_id: str,
    patent_id: str,
    subclass: int,
    features: Any,
    text: Any = None,
) -> ImageRecord:
    return ImageRecord(
        image_id=image_id,
        label=HierLabel(main_class=subclass // 100, subclass=subclass, patent_id=patent_id),
        features=tuple(float(x) for x in features),
        text=text,
    )


def make_spec(**overrides: Any) -> SyntheticSpec:
    """A small corpus: 3 main classes x 2 subclasses x 4 patents x 4 images, d_in=8."""
    defaults: dict[str, Any] = {
        "main_classes": 3,
        "subclasses_per_main": 2,
        "patents_per_subclass": 4,
        "images_per_patent": 4,
        "d_in": 8,
        "seed": 3,
    }
    defaults.update(overrides)
    return SyntheticSpec(**defaults)


def make_train_config(**overrides: Any) -> TrainConfig:
    """Fast settings for the small corpus."""
    defaults: dict[str, Any] = {
        "lr": 5e-3,
        "batch_size": 8,
        "max_epochs": 4,
        "patience": 2,
        "embed_dim": 6,
        "seed": 1,
    }
    defaults.update(overrides)
    return TrainConfig(**defaults)


def write_jsonl(path: Any, lines: list[Any]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write((line if isinstance(line, str) else json.dumps(line)) + "\n")


# ---------------------------------------------------------------------------
# Numerical helpers
# ---------------------------------------------------------------------------


def numerical_grad(
    f: Callable[[np.ndarray], float], X: np.ndarray, h: float = 1e-5
) -> np.ndarray:
    """Central finite differences of a scalar function of ``X``."""
    X = np.array(X, dtype=np.float64)
    grad = np.zeros_like(X)
    for idx in np.ndindex(X.shape):
        orig = X[idx]
        X[idx] = orig + h
        plus = f(X.copy())
        X[idx] = orig - h
        minus = f(X.copy())
        X[idx] = orig
        grad[idx] = (plus - minus) / (2.0 * h)
    return grad


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    num = float(np.linalg.norm(np.asarray(a) - np.asarray(b)))
    den = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-8)
    return num / den


def distinct_patent_labels(K: int, subclasses: int = 2, mains: int = 2) -> list[HierLabel]:
    """K labels of distinct patents spread over a few subclasses and main classes."""
    labels = []
    for i in range(K):
        main = 1 + (i % mains)
        subclass = 100 * main + 1 + (i // mains) % subclasses
        labels.append(HierLabel(main_class=main, subclass=subclass, patent_id=f"p{i}"))
    return labels


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_ds() -> Dataset:
    return generate_synthetic(make_spec())


@pytest.fixture(scope="session")
def small_split(small_ds: Dataset) -> SplitSpec:
    return split_by_patent(small_ds, seed=5)


@pytest.fixture
def train_config() -> TrainConfig:
    return make_train_config()


TREND_SEEDS = (1, 2, 3, 4, 5)


@pytest.fixture(scope="session")
def desk_runs() -> list[tuple[Dataset, SplitSpec, TrainResult]]:
    """HMCL trained on the default synthetic corpus, one corpus/split/run per seed."""
    runs = []
    for seed in TREND_SEEDS:
        ds = generate_synthetic(SyntheticSpec(seed=seed))
        split = split_by_patent(ds, seed=seed)
        runs.append((ds, split, train(ds, split, TrainConfig.desk_scale(seed=seed))))
    return runs
