"""Training batches and the query/database partition used at test time."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Iterator, Sequence
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from hiercl.constants import DEFAULT_BATCH_PATENTS, DEFAULT_NOISE_PROB, DEFAULT_QUERIES_PER_PATENT
from hiercl.data import Dataset
from hiercl.exceptions import InsufficientDataError, ValidationError
from hiercl.models import HierLabel, ImageRecord
from hiercl.numerics import DenseMatrix

logger = logging.getLogger("hiercl")


class TrainBatch(BaseModel):
    """K anchor/positive pairs, one pair per distinct patent."""

    model_config = ConfigDict(frozen=True)

    anchor_records: tuple[ImageRecord, ...]
    positive_records: tuple[ImageRecord, ...]

    @model_validator(mode="after")
    def validate_pairs(self) -> TrainBatch:
        if len(self.anchor_records) != len(self.positive_records):
            raise ValueError("Anchor and positive lists differ in length.")
        patents = set()
        for a, p in zip(self.anchor_records, self.positive_records):
            if a.patent_id != p.patent_id:
                raise ValueError(f"Pair ({a.image_id}, {p.image_id}) spans two patents.")
            if a.image_id == p.image_id:
                raise ValueError(f"Image {a.image_id} is paired with itself.")
            patents.add(a.patent_id)
        if len(patents) != len(self.anchor_records):
            raise ValueError("A patent appears twice in one batch.")
        return self

    @property
    def labels(self) -> list[HierLabel]:
        return [r.label for r in self.anchor_records]

    @property
    def size(self) -> int:
        return len(self.anchor_records)

    def anchor_features(self) -> DenseMatrix:
        return np.array([r.features for r in self.anchor_records], dtype=np.float64)

    def positive_features(self) -> DenseMatrix:
        return np.array([r.features for r in self.positive_records], dtype=np.float64)


class EvalSplit(BaseModel):
    """Queries and the database they are searched against."""

    model_config = ConfigDict(frozen=True)

    queries: tuple[ImageRecord, ...]
    database: tuple[ImageRecord, ...]
    skipped_patents: tuple[str, ...] = ()

    @model_validator(mode="after")
    def validate_disjoint(self) -> EvalSplit:
        if not self.database:
            raise ValueError("The database is empty.")
        query_ids = {r.image_id for r in self.queries}
        if any(r.image_id in query_ids for r in self.database):
            raise ValueError("A query image also appears in the database.")
        return self


def eligible_patents(ds: Dataset, patents: Iterable[str]) -> list[str]:
    """Patents (from ``patents``) with at least two images, sorted."""
    groups = ds.by_patent()
    return sorted(pid for pid in set(patents) if len(groups.get(pid, ())) >= 2)


def _pair_for(
    groups: dict[str, list[ImageRecord]],
    patent_ids: Sequence[str],
    rng: np.random.Generator,
) -> TrainBatch:
    anchors: list[ImageRecord] = []
    positives: list[ImageRecord] = []
    for pid in patent_ids:
        images = groups[pid]
        i, j = rng.choice(len(images), size=2, replace=False)
        anchors.append(images[int(i)])
        positives.append(images[int(j)])
    return TrainBatch(anchor_records=tuple(anchors), positive_records=tuple(positives))


def sample_batch(
    ds: Dataset,
    split: Iterable[str],
    K: int = DEFAULT_BATCH_PATENTS,
    rng: Optional[np.random.Generator] = None,
) -> TrainBatch:
    """Draw K distinct patents uniformly and two distinct images of each.

    Raises:
        InsufficientDataError: Fewer than K patents with two or more images.
    """
    rng = rng if rng is not None else np.random.default_rng()
    eligible = eligible_patents(ds, split)
    if len(eligible) < K:
        raise InsufficientDataError(
            message=f"Need {K} patents with >= 2 images, only {len(eligible)} available."
        )
    chosen = rng.choice(len(eligible), size=K, replace=False)
    return _pair_for(ds.by_patent(), [eligible[int(i)] for i in chosen], rng)


def epoch_batches(
    ds: Dataset,
    split: Iterable[str],
    K: int,
    rng: np.random.Generator,
) -> Iterator[TrainBatch]:
    """One epoch: floor(P / K) batches over a freshly shuffled patent list.

    Raises:
        InsufficientDataError: Fewer than K eligible patents.
    """
    eligible = eligible_patents(ds, split)
    if len(eligible) < K:
        raise InsufficientDataError(
            message=f"Need {K} patents with >= 2 images, only {len(eligible)} available."
        )
    groups = ds.by_patent()
    order = [eligible[int(i)] for i in rng.permutation(len(eligible))]
    for start in range(0, (len(order) // K) * K, K):
        yield _pair_for(groups, order[start : start + K], rng)


def _perturb(
    records: Sequence[ImageRecord], sigma: float, p: float, rng: np.random.Generator
) -> tuple[ImageRecord, ...]:
    out = []
    for record in records:
        if rng.random() < p:
            noisy = np.asarray(record.features) + rng.normal(0.0, sigma, len(record.features))
            record = record.model_copy(update={"features": tuple(float(x) for x in noisy)})
        out.append(record)
    return tuple(out)


def feature_noise(
    batch: TrainBatch,
    sigma: float,
    p: float = DEFAULT_NOISE_PROB,
    rng: Optional[np.random.Generator] = None,
) -> TrainBatch:
    """Add N(0, sigma^2 I) to each record's features with probability ``p``.

    Raises:
        ValidationError: If ``sigma <= 0`` or ``p`` is outside [0, 1].
    """
    if sigma <= 0.0:
        raise ValidationError(message=f"Noise sigma must be positive, got {sigma}.")
    if not 0.0 <= p <= 1.0:
        raise ValidationError(message=f"Noise probability must be in [0, 1], got {p}.")
    rng = rng if rng is not None else np.random.default_rng()
    return TrainBatch(
        anchor_records=_perturb(batch.anchor_records, sigma, p, rng),
        positive_records=_perturb(batch.positive_records, sigma, p, rng),
    )


def build_eval_split(
    ds: Dataset,
    test_patents: Iterable[str],
    queries_per_patent: int = DEFAULT_QUERIES_PER_PATENT,
    rng: Optional[np.random.Generator] = None,
) -> EvalSplit:
    """Pick ``queries_per_patent`` query images per test patent; the rest is the database.

    Patents with no more than ``queries_per_patent`` images would leave no
    same-patent item to find, so they contribute only database images and
    are reported as skipped.

    Raises:
        InsufficientDataError: If the database would be empty.
    """
    if queries_per_patent < 1:
        raise ValidationError(message="queries_per_patent must be >= 1.")
    rng = rng if rng is not None else np.random.default_rng()
    groups = ds.by_patent()
    queries: list[ImageRecord] = []
    database: list[ImageRecord] = []
    skipped: list[str] = []
    for pid in sorted(set(test_patents)):
        images = groups.get(pid, [])
        if len(images) <= queries_per_patent:
            skipped.append(pid)
            database.extend(images)
            continue
        picked = set(int(i) for i in rng.choice(len(images), queries_per_patent, replace=False))
        for idx, record in enumerate(images):
            (queries if idx in picked else database).append(record)
    if not database:
        raise InsufficientDataError(message="The evaluation database is empty.")
    if skipped:
        logger.warning(
            "%d patents have <= %d images and are not used as queries.",
            len(skipped),
            queries_per_patent,
        )
    return EvalSplit(
        queries=tuple(queries), database=tuple(database), skipped_patents=tuple(skipped)
    )
