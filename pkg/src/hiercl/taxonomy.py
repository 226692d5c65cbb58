"""Three-level class hierarchy and pairwise relevance scoring."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import numpy.typing as npt

from hiercl.exceptions import DimensionMismatchError, ValidationError
from hiercl.models import HierLabel, HierLevel, ScoreConfig

__all__ = [
    "HierLabel",
    "HierLevel",
    "ScoreConfig",
    "matches_at_level",
    "relevance",
    "relevance_matrix",
    "relevant_mask",
]


def relevance(a: HierLabel, b: HierLabel, cfg: ScoreConfig) -> float:
    """Relevance of ``b`` to ``a``: s_p, s_s, s_m or 0, finest match wins."""
    if a.patent_id == b.patent_id:
        return cfg.s_p
    if a.subclass == b.subclass:
        return cfg.s_s
    if a.main_class == b.main_class:
        return cfg.s_m
    return 0.0


def relevance_matrix(
    anchors: Sequence[HierLabel],
    candidates: Sequence[HierLabel],
    cfg: ScoreConfig,
) -> npt.NDArray[np.float64]:
    """Vectorize :func:`relevance` over a batch of anchor/candidate labels.

    Raises:
        DimensionMismatchError: If the two lists differ in length.
        ValidationError: If the lists are empty.
    """
    if len(anchors) != len(candidates):
        raise DimensionMismatchError(
            message=f"{len(anchors)} anchors but {len(candidates)} candidates."
        )
    if not anchors:
        raise ValidationError(message="relevance_matrix needs at least one label.")
    H = np.empty((len(anchors), len(candidates)), dtype=np.float64)
    for i, a in enumerate(anchors):
        for j, b in enumerate(candidates):
            H[i, j] = relevance(a, b, cfg)
    return H


def matches_at_level(query: HierLabel, item: HierLabel, level: HierLevel) -> bool:
    """True iff ``item`` shares ``query``'s node at ``level`` (or a finer one)."""
    if level is HierLevel.PATENT_ID:
        return item.patent_id == query.patent_id
    if level is HierLevel.SUBCLASS:
        return item.subclass == query.subclass
    return item.main_class == query.main_class


def relevant_mask(
    query: HierLabel,
    database: Sequence[HierLabel],
    level: HierLevel,
) -> npt.NDArray[np.bool_]:
    """Boolean mask of database items relevant to ``query`` at ``level``."""
    return np.fromiter(
        (matches_at_level(query, item, level) for item in database),
        dtype=bool,
        count=len(database),
    )
