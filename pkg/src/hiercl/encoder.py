"""Projection encoder: parameters, forward/backward passes, text projection, checkpoints.

The encoder maps feature vectors to embeddings with one affine layer or
two affine layers joined by ``tanh``. Weights are stored ``(fan_in, fan_out)``
so a batch is encoded as ``X @ W + b``.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from hiercl._utils import PathLike, ensure_parent, hash_data
from hiercl.constants import CHECKPOINT_FORMAT_VERSION
from hiercl.exceptions import (
    CheckpointVersionError,
    CorruptCheckpointError,
    DimensionMismatchError,
    NonFiniteError,
    ValidationError,
)
from hiercl.models import TrainConfig
from hiercl.numerics import DenseMatrix, as_matrix, as_vector

logger = logging.getLogger("hiercl")


class DenseLayer(BaseModel):
    """Affine map ``x -> x @ weights + bias``."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    weights: np.ndarray
    bias: np.ndarray

    @field_validator("weights", mode="before")
    @classmethod
    def coerce_weights(cls, v: Any) -> Any:
        return as_matrix(v, "weights")

    @field_validator("bias", mode="before")
    @classmethod
    def coerce_bias(cls, v: Any) -> Any:
        return as_vector(v, "bias")

    @model_validator(mode="after")
    def validate_shapes(self) -> DenseLayer:
        if self.bias.shape[0] != self.weights.shape[1]:
            raise DimensionMismatchError(
                message=f"Bias of length {self.bias.shape[0]} for a "
                f"{self.weights.shape} weight matrix."
            )
        return self

    @property
    def fan_in(self) -> int:
        return int(self.weights.shape[0])

    @property
    def fan_out(self) -> int:
        return int(self.weights.shape[1])


class EncoderParams(BaseModel):
    """One or two dense layers composing d_in -> (hidden) -> d."""

    model_config = ConfigDict(frozen=True)

    layers: tuple[DenseLayer, ...]

    @model_validator(mode="after")
    def validate_layers(self) -> EncoderParams:
        if not 1 <= len(self.layers) <= 2:
            raise ValidationError(message=f"Encoder has 1 or 2 layers, got {len(self.layers)}.")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.fan_out != nxt.fan_in:
                raise DimensionMismatchError(
                    message=f"Layer output {prev.fan_out} does not feed input {nxt.fan_in}."
                )
        return self

    @property
    def d_in(self) -> int:
        return self.layers[0].fan_in

    @property
    def d(self) -> int:
        return self.layers[-1].fan_out

    def arrays(self) -> list[np.ndarray]:
        """Flat parameter list ``[W0, b0, (W1, b1)]``."""
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.extend((layer.weights, layer.bias))
        return out

    @classmethod
    def from_arrays(cls, arrays: list[np.ndarray]) -> EncoderParams:
        return cls(
            layers=tuple(
                DenseLayer(weights=arrays[i], bias=arrays[i + 1]) for i in range(0, len(arrays), 2)
            )
        )


class EncoderGradients(BaseModel):
    """Parameter gradients (same layout as :class:`EncoderParams`) and input gradients."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    layers: tuple[DenseLayer, ...]
    inputs: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.extend((layer.weights, layer.bias))
        return out


def init_params(
    d_in: int,
    d: int,
    num_layers: int = 1,
    hidden: int = 128,
    seed: int = 0,
) -> EncoderParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    if num_layers not in (1, 2):
        raise ValidationError(message=f"num_layers must be 1 or 2, got {num_layers}.")
    rng = np.random.default_rng(seed)
    dims = [d_in, d] if num_layers == 1 else [d_in, hidden, d]
    layers = []
    for fan_in, fan_out in zip(dims, dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        layers.append(
            DenseLayer(
                weights=rng.uniform(-bound, bound, size=(fan_in, fan_out)),
                bias=np.zeros(fan_out),
            )
        )
    return EncoderParams(layers=tuple(layers))


def init_from_config(d_in: int, cfg: TrainConfig) -> EncoderParams:
    return init_params(d_in, cfg.embed_dim, cfg.num_layers, cfg.hidden_dim, cfg.seed)


def check_input_dim(params: EncoderParams, d_in: int) -> None:
    """Raise :class:`DimensionMismatchError` if the encoder expects another input size."""
    if params.d_in != d_in:
        raise DimensionMismatchError(
            message=f"Encoder expects {params.d_in} input features, data has {d_in}."
        )


def _forward_cache(
    params: EncoderParams, X: DenseMatrix
) -> tuple[DenseMatrix, list[DenseMatrix]]:
    X = as_matrix(X, "X")
    check_input_dim(params, X.shape[1])
    inputs = [X]
    out = X @ params.layers[0].weights + params.layers[0].bias
    for layer in params.layers[1:]:
        hidden = np.tanh(out)
        inputs.append(hidden)
        out = hidden @ layer.weights + layer.bias
    return out, inputs


def forward(params: EncoderParams, X: Any) -> DenseMatrix:
    """Encode the rows of ``X`` (n x d_in) into n x d embeddings."""
    return _forward_cache(params, X)[0]


def backward(params: EncoderParams, X: Any, grad_output: Any) -> EncoderGradients:
    """Gradients of a scalar loss whose embedding gradient is ``grad_output``."""
    out, inputs = _forward_cache(params, X)
    G = as_matrix(grad_output, "grad_output")
    if G.shape != out.shape:
        raise DimensionMismatchError(
            message=f"grad_output has shape {G.shape}, embeddings have {out.shape}."
        )
    grads: list[DenseLayer] = []
    for idx in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[idx]
        layer_in = inputs[idx]
        grads.append(DenseLayer(weights=layer_in.T @ G, bias=G.sum(axis=0)))
        G = G @ layer.weights.T
        if idx > 0:
            G = G * (1.0 - layer_in**2)
    return EncoderGradients(layers=tuple(reversed(grads)), inputs=G)


def add_gradients(a: EncoderGradients, b: EncoderGradients) -> list[np.ndarray]:
    """Element-wise sum of two parameter gradients, as a flat array list."""
    return [x + y for x, y in zip(a.arrays(), b.arrays())]


# ---------------------------------------------------------------------------
# Text projection
# ---------------------------------------------------------------------------


def text_projection(d_text: int, d: int, seed: int) -> DenseMatrix:
    """Frozen Gaussian map from hashed text features to the embedding space."""
    rng = np.random.default_rng([seed, d_text, d])
    return rng.normal(0.0, 1.0 / np.sqrt(d_text), size=(d_text, d))


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(params: EncoderParams, cfg: TrainConfig, path: PathLike) -> None:
    """Write parameters and config as one JSON document (lossless floats)."""
    body = {
        "config": cfg.model_dump(mode="json", by_alias=True),
        "layers": [
            {
                "rows": layer.fan_in,
                "cols": layer.fan_out,
                "weights": layer.weights.ravel().tolist(),
                "bias": layer.bias.tolist(),
            }
            for layer in params.layers
        ],
    }
    doc = {"format_version": CHECKPOINT_FORMAT_VERSION, "checksum": hash_data(body), **body}
    p = ensure_parent(path)
    p.write_text(json.dumps(doc) + "\n", encoding="utf-8")
    logger.info("Saved checkpoint to %s.", p)


def load_checkpoint(path: PathLike) -> tuple[EncoderParams, TrainConfig]:
    """Read a checkpoint written by :func:`save_checkpoint`.

    Raises:
        CorruptCheckpointError: Unreadable, truncated or inconsistent file.
        CheckpointVersionError: Unsupported ``format_version``.
    """
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CorruptCheckpointError(message=f"checkpoint '{p}' does not exist.") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptCheckpointError(message=f"checkpoint '{p}' is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise CorruptCheckpointError(message=f"checkpoint '{p}' has no format_version.")
    if doc["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointVersionError(
            message=f"checkpoint '{p}' has format_version {doc['format_version']}, "
            f"expected {CHECKPOINT_FORMAT_VERSION}."
        )
    body = {key: doc[key] for key in ("config", "layers") if key in doc}
    if doc.get("checksum") != hash_data(body):
        raise CorruptCheckpointError(message=f"checkpoint '{p}' fails its checksum.")
    try:
        cfg = TrainConfig.model_validate(doc["config"])
        layers = []
        for entry in doc["layers"]:
            rows, cols = int(entry["rows"]), int(entry["cols"])
            weights = np.asarray(entry["weights"], dtype=np.float64)
            if weights.size != rows * cols:
                raise ValueError(f"{weights.size} weights for a {rows}x{cols} layer")
            layers.append(DenseLayer(weights=weights.reshape(rows, cols), bias=entry["bias"]))
        params = EncoderParams(layers=tuple(layers))
    except (KeyError, TypeError, ValueError, pydantic.ValidationError) as exc:
        raise CorruptCheckpointError(message=f"checkpoint '{p}' is malformed: {exc}") from None
    except (DimensionMismatchError, NonFiniteError, ValidationError) as exc:
        raise CorruptCheckpointError(message=f"checkpoint '{p}' is malformed: {exc}") from None
    return params, cfg


def layer_summary(params: EncoderParams) -> str:
    """Human-readable shape, e.g. ``32 -> 128 -> 16``."""
    dims = [params.d_in] + [layer.fan_out for layer in params.layers]
    return " -> ".join(str(x) for x in dims)
