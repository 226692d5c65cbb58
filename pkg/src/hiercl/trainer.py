"""Training loop: batches, loss, backprop, AdamW and early stopping on validation mAP."""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from hiercl.data import Dataset, check_split, text_features
from hiercl.encoder import (
    EncoderParams,
    add_gradients,
    backward,
    forward,
    init_from_config,
    text_projection,
)
from hiercl.exceptions import NonFiniteError, TrainingError, ValidationError
from hiercl.loss import BatchEmbeddings, LossConfig, LossOutput, contrastive_loss, total_loss
from hiercl.models import (
    EpochLog,
    HierLevel,
    ImageRecord,
    LossMode,
    SplitSpec,
    TrainConfig,
    TrainingLog,
)
from hiercl.numerics import DenseMatrix
from hiercl.optim import AdamWState, adamw_step
from hiercl.retrieval import evaluate
from hiercl.sampler import EvalSplit, TrainBatch, build_eval_split, epoch_batches, feature_noise
from hiercl.taxonomy import relevance_matrix

logger = logging.getLogger("hiercl")


class TrainResult(BaseModel):
    """Best-validation parameters and the per-epoch log."""

    model_config = ConfigDict(frozen=True)

    params: EncoderParams
    log: TrainingLog
    config: TrainConfig


def loss_config(cfg: TrainConfig) -> LossConfig:
    return LossConfig(tau=cfg.tau, lambda_=cfg.lambda_, symmetric=cfg.symmetric)


class TextEncoder:
    """Frozen text tower: hashed template features times a fixed random projection."""

    def __init__(self, cfg: TrainConfig) -> None:
        self._dim = cfg.text_dim
        self._seed = cfg.seed
        self._projection = text_projection(cfg.text_dim, cfg.embed_dim, cfg.seed)
        self._cache: dict[str, np.ndarray] = {}

    def encode(self, records: tuple[ImageRecord, ...]) -> DenseMatrix:
        rows = []
        for record in records:
            if not record.text:
                raise ValidationError(
                    message=f"Record '{record.image_id}' has no text; --use-text needs it."
                )
            if record.text not in self._cache:
                feats = text_features(record.text, self._dim, self._seed)
                self._cache[record.text] = feats @ self._projection
            rows.append(self._cache[record.text])
        return np.array(rows, dtype=np.float64)


def batch_relevance(batch: TrainBatch, cfg: TrainConfig) -> DenseMatrix:
    """Relevance matrix of a batch: the hierarchy in HMCL mode, identity in CL mode."""
    if cfg.loss_mode is LossMode.CL:
        return np.eye(batch.size)
    return relevance_matrix(batch.labels, batch.labels, cfg.scores)


def batch_loss(
    params: EncoderParams,
    batch: TrainBatch,
    cfg: TrainConfig,
    text_encoder: Optional[TextEncoder] = None,
) -> tuple[LossOutput, DenseMatrix, DenseMatrix]:
    """Loss of one batch plus the anchor and positive feature matrices it was computed on."""
    Xa = batch.anchor_features()
    Xp = batch.positive_features()
    text = text_encoder.encode(batch.anchor_records) if text_encoder is not None else None
    embeddings = BatchEmbeddings(
        anchors=forward(params, Xa), positives=forward(params, Xp), text=text
    )
    lcfg = loss_config(cfg)
    if cfg.loss_mode is LossMode.CL and text is None:
        out = contrastive_loss(embeddings, lcfg)
    else:
        out = total_loss(embeddings, batch_relevance(batch, cfg), lcfg)
    return out, Xa, Xp


def train_step(
    params: EncoderParams,
    state: AdamWState,
    batch: TrainBatch,
    cfg: TrainConfig,
    text_encoder: Optional[TextEncoder] = None,
) -> tuple[EncoderParams, AdamWState, float]:
    """Forward, loss, backward and one AdamW update."""
    out, Xa, Xp = batch_loss(params, batch, cfg, text_encoder)
    if not math.isfinite(out.value):
        raise NonFiniteError(message=f"Loss is {out.value}.")
    grads_a = backward(params, Xa, out.grad_anchors)
    grads_p = backward(params, Xp, out.grad_positives)
    grads = add_gradients(grads_a, grads_p)
    params, state = adamw_step(state, params, grads)
    return params, state, out.value


def validation_map(params: EncoderParams, split: Optional[EvalSplit]) -> Optional[float]:
    """Patent-ID mAP on the validation queries, or None without a validation split."""
    if split is None:
        return None
    return evaluate(params, split, ks=(1,)).levels[HierLevel.PATENT_ID].map


def validation_split(ds: Dataset, split: SplitSpec, cfg: TrainConfig) -> Optional[EvalSplit]:
    """Query/database partition of the validation patents, seeded by ``cfg.seed``."""
    if not split.val:
        logger.warning("No validation patents; the last epoch's parameters are kept.")
        return None
    return build_eval_split(
        ds, split.val, cfg.queries_per_patent, np.random.default_rng(cfg.seed)
    )


def train(ds: Dataset, split: SplitSpec, cfg: TrainConfig) -> TrainResult:
    """Train an encoder and keep the parameters with the best validation mAP.

    Raises:
        TrainingError: If a loss or gradient becomes non-finite.
        InsufficientDataError: If the train split cannot fill a batch.
    """
    check_split(ds, split)
    rng = np.random.default_rng(cfg.seed)
    params = init_from_config(ds.d_in, cfg)
    state = AdamWState.zeros_like(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    text_encoder = TextEncoder(cfg) if cfg.use_text else None
    val_split = validation_split(ds, split, cfg)
    use_noise = cfg.noise_sigma > 0.0 and cfg.noise_prob > 0.0

    log = TrainingLog()
    best_params = params
    best_map = -math.inf
    since_best = 0
    logger.info(
        "Training %s for up to %d epochs (K=%d, lr=%g, tau=%g).",
        cfg.loss_mode.value,
        cfg.max_epochs,
        cfg.batch_size,
        cfg.lr,
        cfg.tau,
    )
    for epoch in range(1, cfg.max_epochs + 1):
        losses: list[float] = []
        for step, batch in enumerate(epoch_batches(ds, split.train, cfg.batch_size, rng), 1):
            if use_noise:
                batch = feature_noise(batch, cfg.noise_sigma, cfg.noise_prob, rng)
            try:
                params, state, value = train_step(params, state, batch, cfg, text_encoder)
            except NonFiniteError as exc:
                raise TrainingError(
                    message=f"epoch {epoch}, batch {step}: {exc.message} "
                    f"(lr={cfg.lr}, tau={cfg.tau})"
                ) from exc
            losses.append(value)

        total = 0.0
        for v in losses:
            total += v
        mean_loss = total / len(losses)
        val_map = validation_map(params, val_split)
        log.epochs.append(EpochLog(epoch=epoch, mean_loss=mean_loss, val_map=val_map))
        logger.info("epoch %d: loss=%.6f val_mAP=%s", epoch, mean_loss, val_map)

        if val_map is None or val_map > best_map:
            best_map = val_map if val_map is not None else best_map
            best_params = params
            log.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                log.stopped_early = True
                logger.info("Early stop after epoch %d (best epoch %d).", epoch, log.best_epoch)
                break

    for entry in log.epochs:
        entry.best = entry.epoch == log.best_epoch
    return TrainResult(params=best_params, log=log, config=cfg)
