"""Embedding index, cosine ranking and per-level retrieval metrics.

Metrics use binary relevance at each hierarchy level and are accumulated
with plain left-to-right sums so that results do not depend on vectorized
reduction order.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from typing import Any, Optional

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, model_validator

from hiercl.constants import DEFAULT_KS, NORM_EPS
from hiercl.encoder import EncoderParams, forward
from hiercl.exceptions import (
    DegenerateInputError,
    DimensionMismatchError,
    InsufficientDataError,
    ValidationError,
)
from hiercl.models import (
    HierLabel,
    HierLevel,
    ImageRecord,
    LevelMetrics,
    MetricsReport,
    ScoreConfig,
)
from hiercl.numerics import DenseMatrix, as_vector
from hiercl.sampler import EvalSplit
from hiercl.taxonomy import relevance, relevant_mask

logger = logging.getLogger("hiercl")

BoolMask = npt.NDArray[np.bool_]


class EmbeddingIndex(BaseModel):
    """Unit-norm database embeddings with their labels and image ids."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    embeddings: np.ndarray
    labels: tuple[HierLabel, ...]
    image_ids: tuple[str, ...]

    @model_validator(mode="after")
    def validate_parallel(self) -> EmbeddingIndex:
        n = self.embeddings.shape[0]
        if n < 1:
            raise ValueError("An index needs at least one row.")
        if len(self.labels) != n or len(self.image_ids) != n:
            raise ValueError("embeddings, labels and image_ids must have equal length.")
        return self

    @property
    def size(self) -> int:
        return int(self.embeddings.shape[0])

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[1])


class Ranking(BaseModel):
    """Database indices by descending similarity (ties by ascending index)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    query_id: Optional[str] = None
    order: np.ndarray
    similarities: np.ndarray

    def ranked(self, mask: Any) -> BoolMask:
        """``mask`` (database order) permuted into rank order."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != self.order.shape:
            raise DimensionMismatchError(
                message=f"Mask of length {mask.size} for a ranking of {self.order.size}."
            )
        return mask[self.order]


def embed_records(params: EncoderParams, records: Sequence[ImageRecord]) -> DenseMatrix:
    """Encode records and l2-normalize each embedding.

    Raises:
        DegenerateInputError: Naming the record whose embedding is zero.
    """
    if not records:
        raise InsufficientDataError(message="No records to embed.")
    X = np.array([r.features for r in records], dtype=np.float64)
    Z = forward(params, X)
    norms = np.linalg.norm(Z, axis=1)
    zero = np.flatnonzero(norms <= NORM_EPS)
    if zero.size:
        raise DegenerateInputError(
            message=f"Record '{records[int(zero[0])].image_id}' has a zero embedding."
        )
    return Z / norms[:, None]


def build_index(params: EncoderParams, records: Sequence[ImageRecord]) -> EmbeddingIndex:
    """Embed ``records`` into a searchable index."""
    return EmbeddingIndex(
        embeddings=embed_records(params, records),
        labels=tuple(r.label for r in records),
        image_ids=tuple(r.image_id for r in records),
    )


def rank(
    index: EmbeddingIndex, query_embedding: Any, query_id: Optional[str] = None
) -> Ranking:
    """Sort the whole database by cosine similarity to the query."""
    q = as_vector(query_embedding, "query_embedding")
    if q.shape[0] != index.dim:
        raise DimensionMismatchError(
            message=f"Query has dimension {q.shape[0]}, index has {index.dim}."
        )
    norm = float(np.linalg.norm(q))
    if norm <= NORM_EPS:
        raise DegenerateInputError(message="Query embedding is the zero vector.")
    sims = index.embeddings @ (q / norm)
    order = np.argsort(-sims, kind="stable")
    return Ranking(query_id=query_id, order=order, similarities=sims[order])


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _relevant_in_rank_order(ranking: Ranking, relevant: Any, op: str) -> BoolMask:
    ranked = ranking.ranked(relevant)
    if not ranked.any():
        raise DegenerateInputError(message=f"{op} needs at least one relevant item.")
    return ranked


def average_precision(ranking: Ranking, relevant: Any) -> float:
    """Mean of precision@k over the ranks k of relevant items."""
    ranked = _relevant_in_rank_order(ranking, relevant, "average_precision")
    hits = 0
    total = 0.0
    for k, rel in enumerate(ranked, start=1):
        if rel:
            hits += 1
            total += hits / k
    return total / hits


def ndcg(ranking: Ranking, relevant: Any) -> float:
    """Binary-gain nDCG over the full list with a log2(rank + 1) discount."""
    ranked = _relevant_in_rank_order(ranking, relevant, "ndcg")
    dcg = 0.0
    hits = 0
    for k, rel in enumerate(ranked, start=1):
        if rel:
            hits += 1
            dcg += 1.0 / math.log2(k + 1)
    ideal = 0.0
    for k in range(1, hits + 1):
        ideal += 1.0 / math.log2(k + 1)
    return dcg / ideal


def _first_relevant_rank(ranking: Ranking, relevant: Any) -> Optional[int]:
    ranked = ranking.ranked(relevant)
    hits = np.flatnonzero(ranked)
    return int(hits[0]) + 1 if hits.size else None


def _check_k(K: int) -> None:
    if K < 1:
        raise ValidationError(message=f"K must be >= 1, got {K}.")


def mrr_at_k(ranking: Ranking, relevant: Any, K: int) -> float:
    """1 / rank of the first relevant item if it is within the top K, else 0."""
    _check_k(K)
    first = _first_relevant_rank(ranking, relevant)
    return 1.0 / first if first is not None and first <= K else 0.0


def acc_at_k(ranking: Ranking, relevant: Any, K: int) -> int:
    """1 if any relevant item is within the top K, else 0."""
    _check_k(K)
    first = _first_relevant_rank(ranking, relevant)
    return 1 if first is not None and first <= K else 0


def graded_ndcg(
    ranking: Ranking, query: HierLabel, labels: Sequence[HierLabel], cfg: ScoreConfig
) -> Optional[float]:
    """nDCG with hierarchy-graded gains (s_p / s_s / s_m / 0); None if every gain is 0."""
    gains = [relevance(query, labels[int(i)], cfg) for i in ranking.order]
    ideal_gains = sorted(gains, reverse=True)
    ideal = 0.0
    for k, g in enumerate(ideal_gains, start=1):
        ideal += g / math.log2(k + 1)
    if ideal == 0.0:
        return None
    dcg = 0.0
    for k, g in enumerate(gains, start=1):
        dcg += g / math.log2(k + 1)
    return dcg / ideal


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


class QueryLevelScores(BaseModel):
    """All metrics of one query at one level."""

    ap: float
    ndcg: float
    mrr: dict[int, float]
    acc: dict[int, int]
    relevant: int


class QueryScores(BaseModel):
    """Metrics of one query at every level; a level is None without relevant items."""

    image_id: str
    levels: dict[HierLevel, Optional[QueryLevelScores]]
    graded_ndcg: Optional[float] = None


def check_ks(ks: Sequence[int]) -> list[int]:
    """Sorted, de-duplicated cutoffs, each >= 1."""
    if not ks:
        raise ValidationError(message="At least one K is required.")
    for k in ks:
        _check_k(int(k))
    return sorted({int(k) for k in ks})


def score_queries(
    index: EmbeddingIndex,
    query_embeddings: Any,
    query_labels: Sequence[HierLabel],
    query_ids: Sequence[str],
    ks: Sequence[int] = DEFAULT_KS,
    scores: Optional[ScoreConfig] = None,
) -> list[QueryScores]:
    """Rank the database once per query and score it at every level and K."""
    ks = check_ks(ks)
    results = []
    for q, label, qid in zip(np.asarray(query_embeddings), query_labels, query_ids):
        ranking = rank(index, q, query_id=qid)
        levels: dict[HierLevel, Optional[QueryLevelScores]] = {}
        for level in HierLevel:
            mask = relevant_mask(label, index.labels, level)
            if not mask.any():
                levels[level] = None
                continue
            levels[level] = QueryLevelScores(
                ap=average_precision(ranking, mask),
                ndcg=ndcg(ranking, mask),
                mrr={k: mrr_at_k(ranking, mask, k) for k in ks},
                acc={k: acc_at_k(ranking, mask, k) for k in ks},
                relevant=int(mask.sum()),
            )
        graded = graded_ndcg(ranking, label, index.labels, scores) if scores else None
        results.append(QueryScores(image_id=qid, levels=levels, graded_ndcg=graded))
    return results


def _mean(values: Sequence[float]) -> float:
    total = 0.0
    for v in values:
        total += v
    return total / len(values) if values else 0.0


def aggregate(
    per_query: Sequence[QueryScores], ks: Sequence[int], database_size: int
) -> MetricsReport:
    """Per-level means over queries that have at least one relevant item."""
    ks = check_ks(ks)
    levels: dict[HierLevel, LevelMetrics] = {}
    for level in HierLevel:
        scored = [q.levels[level] for q in per_query if q.levels.get(level) is not None]
        rows = [s for s in scored if s is not None]
        levels[level] = LevelMetrics(
            map=_mean([s.ap for s in rows]),
            ndcg=_mean([s.ndcg for s in rows]),
            mrr={k: _mean([s.mrr[k] for s in rows]) for k in ks},
            acc={k: _mean([float(s.acc[k]) for s in rows]) for k in ks},
            query_count=len(rows),
            excluded_queries=len(per_query) - len(rows),
            mean_relevant=_mean([float(s.relevant) for s in rows]),
        )
    graded = [q.graded_ndcg for q in per_query if q.graded_ndcg is not None]
    return MetricsReport(
        ks=ks,
        query_count=len(per_query),
        database_size=database_size,
        levels=levels,
        graded_ndcg=_mean(graded) if graded else None,
    )


def evaluate(
    params: EncoderParams,
    eval_split: EvalSplit,
    cfg: Optional[ScoreConfig] = None,
    ks: Sequence[int] = DEFAULT_KS,
) -> MetricsReport:
    """Embed, rank and score every query of ``eval_split`` against its database.

    ``cfg`` adds the hierarchy-graded nDCG to the report; the per-level
    metrics use binary relevance.

    Raises:
        InsufficientDataError: If the database is empty.
    """
    if not eval_split.database:
        raise InsufficientDataError(message="The evaluation database is empty.")
    index = build_index(params, eval_split.database)
    if eval_split.queries:
        query_embeddings = embed_records(params, eval_split.queries)
    else:
        query_embeddings = np.empty((0, index.dim))
    per_query = score_queries(
        index,
        query_embeddings,
        [r.label for r in eval_split.queries],
        [r.image_id for r in eval_split.queries],
        ks,
        cfg,
    )
    report = aggregate(per_query, ks, index.size)
    logger.info(
        "Evaluated %d queries against %d items: patent mAP=%.4f.",
        report.query_count,
        report.database_size,
        report.levels[HierLevel.PATENT_ID].map,
    )
    return report


# ---------------------------------------------------------------------------
# Report serialization
# ---------------------------------------------------------------------------

REPORT_COLUMNS = ["level", "metric", "k", "value", "query_count"]


def report_rows(report: MetricsReport) -> list[dict[str, Any]]:
    """Flatten a report: one row per (level, metric, K)."""
    rows: list[dict[str, Any]] = []
    for level in HierLevel:
        m = report.levels[level]
        base = {"level": level.value, "query_count": m.query_count}
        rows.append({**base, "metric": "mAP", "k": "", "value": m.map})
        rows.append({**base, "metric": "nDCG", "k": "", "value": m.ndcg})
        for k in report.ks:
            rows.append({**base, "metric": "MRR", "k": k, "value": m.mrr[k]})
        for k in report.ks:
            rows.append({**base, "metric": "Acc", "k": k, "value": m.acc[k]})
    return rows
