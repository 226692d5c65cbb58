"""Dense double-precision kernels shared by the loss, encoder, retrieval and analysis code.

Matrices are plain ``numpy`` float64 arrays; :func:`as_matrix` is the single
place that checks shape and finiteness.
"""

from __future__ import annotations

from typing import Any

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict

from hiercl.constants import NORM_EPS
from hiercl.exceptions import (
    DegenerateInputError,
    DimensionMismatchError,
    NonFiniteError,
    ValidationError,
)

DenseMatrix = npt.NDArray[np.float64]
Vector = npt.NDArray[np.float64]


def as_matrix(values: Any, name: str = "matrix") -> DenseMatrix:
    """Coerce ``values`` to a finite 2-D float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatchError(message=f"{name} must be 2-D, got shape {arr.shape}.")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(message=f"{name} contains non-finite entries.")
    return arr


def as_vector(values: Any, name: str = "vector") -> Vector:
    """Coerce ``values`` to a finite 1-D float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(message=f"{name} must be 1-D, got shape {arr.shape}.")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(message=f"{name} contains non-finite entries.")
    return arr


def l2_normalize(v: Any) -> Vector:
    """Return ``v / ||v||``.

    Raises:
        DegenerateInputError: If ``v`` is the zero vector.
    """
    v = as_vector(v)
    norm = float(np.linalg.norm(v))
    if norm <= NORM_EPS:
        raise DegenerateInputError(message="Cannot normalize a zero vector.")
    return v / norm


def l2_normalize_rows(M: Any) -> DenseMatrix:
    """Normalize every row of ``M`` to unit length.

    Raises:
        DegenerateInputError: Naming the first zero row.
    """
    M = as_matrix(M)
    norms = np.linalg.norm(M, axis=1)
    zero = np.flatnonzero(norms <= NORM_EPS)
    if zero.size:
        raise DegenerateInputError(message=f"Row {int(zero[0])} is a zero vector.")
    return M / norms[:, None]


def cosine_sim(a: Any, b: Any) -> float:
    """Cosine similarity of two vectors, clamped to [-1, 1]."""
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.shape != b.shape:
        raise DimensionMismatchError(message=f"Vectors of length {a.size} and {b.size}.")
    value = float(np.dot(l2_normalize(a), l2_normalize(b)))
    return min(1.0, max(-1.0, value))


def sim_matrix(A: Any, B: Any) -> DenseMatrix:
    """Pairwise cosine similarities between the rows of ``A`` and ``B``."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatchError(
            message=f"Inner dimensions differ: {A.shape[1]} vs {B.shape[1]}."
        )
    S = l2_normalize_rows(A) @ l2_normalize_rows(B).T
    return np.clip(S, -1.0, 1.0)


def log_softmax_row(logits: Any) -> Vector:
    """Numerically stable ``logits - logsumexp(logits)``."""
    x = as_vector(logits, "logits")
    if x.size == 0:
        raise ValidationError(message="log_softmax_row needs at least one logit.")
    shifted = x - np.max(x)
    return shifted - np.log(np.sum(np.exp(shifted)))


def log_softmax_rows(logits: DenseMatrix) -> DenseMatrix:
    """Row-wise :func:`log_softmax_row` for a 2-D array."""
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))


def normalize_rows_backward(X: DenseMatrix, grad_unit: DenseMatrix) -> DenseMatrix:
    """Pull a gradient through ``u = x / ||x||`` row by row.

    ``dL/dx = (g - u (u . g)) / ||x||``.
    """
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    U = X / norms
    radial = np.sum(U * grad_unit, axis=1, keepdims=True)
    return (grad_unit - U * radial) / norms


class PCAResult(BaseModel):
    """Two-component projection and the variance each component explains."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    projection: np.ndarray
    components: np.ndarray
    explained_variance: tuple[float, float]


def pca2(X: Any) -> PCAResult:
    """Project the rows of ``X`` onto the top two principal components.

    Uses a full symmetric eigendecomposition of the sample covariance. Each
    component is signed so that its largest-magnitude loading is positive.

    Raises:
        ValidationError: If ``X`` has fewer than 3 rows or 2 columns.
        DegenerateInputError: If all rows are identical.
    """
    X = as_matrix(X, "X")
    n, d = X.shape
    if n < 3 or d < 2:
        raise ValidationError(message=f"pca2 needs n >= 3 and d >= 2, got {n}x{d}.")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    if float(np.trace(cov)) <= NORM_EPS:
        raise DegenerateInputError(message="All rows are identical; PCA is undefined.")

    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:2]
    components = eigvecs[:, order].T.copy()
    for c in components:
        if c[np.argmax(np.abs(c))] < 0:
            c *= -1.0
    variances = np.clip(eigvals[order], 0.0, None)
    return PCAResult(
        projection=centered @ components.T,
        components=components,
        explained_variance=(float(variances[0]), float(variances[1])),
    )
