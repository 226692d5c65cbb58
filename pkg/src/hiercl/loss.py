"""Contrastive losses with exact gradients.

All three objectives (single-positive, hierarchical multi-positive and the
image-text language term) reduce to one kernel: a weighted negative
log-softmax over temperature-scaled cosine similarities. The kernel is
:func:`multi_positive_logit_loss`; the public losses chain its logit
gradient back through the cosine similarity and the row normalization.
"""

from __future__ import annotations

from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from hiercl.constants import DEFAULT_LAMBDA, DEFAULT_TAU, NORM_EPS
from hiercl.exceptions import (
    DegenerateInputError,
    DimensionMismatchError,
    ValidationError,
)
from hiercl.numerics import (
    DenseMatrix,
    Vector,
    as_matrix,
    log_softmax_rows,
    normalize_rows_backward,
)


class LossConfig(BaseModel):
    """Temperature, language-term weight and loss direction."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    tau: float = Field(default=DEFAULT_TAU, gt=0.0)
    lambda_: float = Field(default=DEFAULT_LAMBDA, ge=0.0, alias="lambda")
    symmetric: bool = False


class BatchEmbeddings(BaseModel):
    """Anchor, positive and optional text embeddings of one batch (K rows each)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    anchors: np.ndarray
    positives: np.ndarray
    text: Optional[np.ndarray] = None

    @field_validator("anchors", "positives", "text", mode="before")
    @classmethod
    def coerce_matrix(cls, v: Any) -> Any:
        if v is None:
            return None
        return as_matrix(v, "embeddings")

    @model_validator(mode="after")
    def validate_shapes(self) -> BatchEmbeddings:
        shape = self.anchors.shape
        for name, m in (("positives", self.positives), ("text", self.text)):
            if m is not None and m.shape != shape:
                raise DimensionMismatchError(
                    message=f"{name} has shape {m.shape}, anchors have {shape}."
                )
        present = {"anchors": self.anchors, "positives": self.positives, "text": self.text}
        for name, m in present.items():
            if m is None:
                continue
            norms = np.linalg.norm(m, axis=1)
            if np.any(norms <= NORM_EPS):
                row = int(np.flatnonzero(norms <= NORM_EPS)[0])
                raise DegenerateInputError(message=f"{name} row {row} is a zero vector.")
        return self

    @property
    def size(self) -> int:
        return int(self.anchors.shape[0])


class LossOutput(BaseModel):
    """Mean loss over anchors and its gradients with respect to every input."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    value: float
    grad_anchors: np.ndarray
    grad_positives: np.ndarray
    grad_text: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# Kernel
# ---------------------------------------------------------------------------


def normalize_relevance(H: DenseMatrix) -> DenseMatrix:
    """Divide each row of ``H`` by its sum so the weights form a distribution.

    Raises:
        DegenerateInputError: If some row sums to zero.
    """
    totals = H.sum(axis=1, keepdims=True)
    if np.any(totals <= 0.0):
        row = int(np.flatnonzero(totals[:, 0] <= 0.0)[0])
        raise DegenerateInputError(message=f"Relevance row {row} has no positive entry.")
    return H / totals


def multi_positive_logit_loss(
    logits: DenseMatrix, H: DenseMatrix
) -> tuple[Vector, DenseMatrix]:
    """Per-row weighted negative log-softmax and its gradient w.r.t. ``logits``.

    Row ``i`` costs ``-sum_j (h_ij / H_i) log softmax(logits_i)_j``. The
    returned gradient is that of the *sum* of row costs and equals
    ``softmax(logits) - h / H``.
    """
    W = normalize_relevance(H)
    log_p = log_softmax_rows(logits)
    row_losses = -np.sum(W * log_p, axis=1)
    grad = np.exp(log_p) - W
    return row_losses, grad


def _directional(
    Z: DenseMatrix, C: DenseMatrix, H: DenseMatrix, tau: float
) -> tuple[float, DenseMatrix, DenseMatrix]:
    """Anchors ``Z`` scored against candidates ``C``; mean loss and both gradients."""
    K = Z.shape[0]
    Zn = Z / np.linalg.norm(Z, axis=1, keepdims=True)
    Cn = C / np.linalg.norm(C, axis=1, keepdims=True)
    S = Zn @ Cn.T
    row_losses, grad_logits = multi_positive_logit_loss(S / tau, H)
    dS = grad_logits / (tau * K)
    grad_z = normalize_rows_backward(Z, dS @ Cn)
    grad_c = normalize_rows_backward(C, dS.T @ Zn)
    return float(np.mean(row_losses)), grad_z, grad_c


def _pair_loss(
    Z: DenseMatrix, C: DenseMatrix, H: DenseMatrix, cfg: LossConfig
) -> tuple[float, DenseMatrix, DenseMatrix]:
    value, grad_z, grad_c = _directional(Z, C, H, cfg.tau)
    if not cfg.symmetric:
        return value, grad_z, grad_c
    back_value, back_c, back_z = _directional(C, Z, H.T, cfg.tau)
    return (
        0.5 * (value + back_value),
        0.5 * (grad_z + back_z),
        0.5 * (grad_c + back_c),
    )


def _check_batch(batch: BatchEmbeddings) -> None:
    if batch.size < 2:
        raise ValidationError(
            message=f"A contrastive batch needs K >= 2 pairs, got K={batch.size}."
        )


def _check_relevance(H: Any, K: int, symmetric: bool) -> DenseMatrix:
    H = as_matrix(H, "relevance matrix")
    if H.shape != (K, K):
        raise DimensionMismatchError(
            message=f"Relevance matrix has shape {H.shape}, expected ({K}, {K})."
        )
    if np.any(H < 0.0):
        raise ValidationError(message="Relevance scores must be non-negative.")
    if np.any(H.sum(axis=1) <= 0.0):
        row = int(np.flatnonzero(H.sum(axis=1) <= 0.0)[0])
        raise DegenerateInputError(message=f"Anchor {row} has no positive in the batch.")
    if symmetric and np.any(H.sum(axis=0) <= 0.0):
        col = int(np.flatnonzero(H.sum(axis=0) <= 0.0)[0])
        raise DegenerateInputError(message=f"Candidate {col} has no positive in the batch.")
    return H


# ---------------------------------------------------------------------------
# Public losses
# ---------------------------------------------------------------------------


def contrastive_loss(batch: BatchEmbeddings, cfg: LossConfig) -> LossOutput:
    """Single-positive contrastive loss: anchor ``i`` pairs only with positive ``i``."""
    _check_batch(batch)
    return hier_loss(batch, np.eye(batch.size), cfg)


def hier_loss(batch: BatchEmbeddings, H: Any, cfg: LossConfig) -> LossOutput:
    """Hierarchical multi-positive contrastive loss.

    Every candidate ``j`` is a positive of anchor ``i`` with weight
    ``h_ij / H_i``, ``H_i`` being the row sum of ``H``.

    Raises:
        DegenerateInputError: If an anchor has an all-zero relevance row.
    """
    _check_batch(batch)
    H = _check_relevance(H, batch.size, cfg.symmetric)
    value, grad_a, grad_p = _pair_loss(batch.anchors, batch.positives, H, cfg)
    return LossOutput(value=value, grad_anchors=grad_a, grad_positives=grad_p)


def language_term(batch: BatchEmbeddings, H: Any, cfg: LossConfig) -> LossOutput:
    """Image-to-text term weighted by ``lambda``; gradients reach anchors and text."""
    if batch.text is None:
        raise ValidationError(message="language_term needs text embeddings.")
    _check_batch(batch)
    H = _check_relevance(H, batch.size, cfg.symmetric)
    zeros = np.zeros_like(batch.anchors)
    if cfg.lambda_ == 0.0:
        return LossOutput(
            value=0.0, grad_anchors=zeros, grad_positives=zeros, grad_text=zeros.copy()
        )
    value, grad_a, grad_t = _pair_loss(batch.anchors, batch.text, H, cfg)
    lam = cfg.lambda_
    return LossOutput(
        value=lam * value,
        grad_anchors=lam * grad_a,
        grad_positives=zeros,
        grad_text=lam * grad_t,
    )


def total_loss(batch: BatchEmbeddings, H: Any, cfg: LossConfig) -> LossOutput:
    """Hierarchical loss plus the language term when text is present and ``lambda > 0``."""
    image = hier_loss(batch, H, cfg)
    if batch.text is None or cfg.lambda_ == 0.0:
        return image
    text = language_term(batch, H, cfg)
    return LossOutput(
        value=image.value + text.value,
        grad_anchors=image.grad_anchors + text.grad_anchors,
        grad_positives=image.grad_positives,
        grad_text=text.grad_text,
    )
