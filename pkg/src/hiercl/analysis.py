"""Comparison tables, PCA projections, curves and embedding geometry as plot-ready rows."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from hiercl._utils import PathLike, resolve_threads, write_csv
from hiercl.constants import DEFAULT_KS
from hiercl.data import Dataset
from hiercl.encoder import EncoderParams, init_from_config
from hiercl.exceptions import ValidationError
from hiercl.models import (
    ComparisonRow,
    HierLevel,
    ImageRecord,
    LossMode,
    Method,
    MetricsReport,
    ProjectionRow,
    SplitSpec,
    TrainConfig,
)
from hiercl.numerics import pca2
from hiercl.retrieval import check_ks, embed_records, evaluate
from hiercl.sampler import build_eval_split
from hiercl.trainer import train

logger = logging.getLogger("hiercl")

COMPARISON_COLUMNS = ["method", "level", "metric", "K", "mean", "std", "seeds"]
PROJECTION_COLUMNS = ["x", "y", "subclass", "main_class", "image_id"]
CURVE_COLUMNS = ["method", "level", "metric", "K", "value"]


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------


def _metric_values(report: MetricsReport) -> list[tuple[HierLevel, str, Optional[int], float]]:
    out: list[tuple[HierLevel, str, Optional[int], float]] = []
    for level in HierLevel:
        m = report.levels[level]
        out.append((level, "mAP", None, m.map))
        out.append((level, "nDCG", None, m.ndcg))
        for k in report.ks:
            out.append((level, "MRR", k, m.mrr[k]))
        for k in report.ks:
            out.append((level, "Acc", k, m.acc[k]))
    return out


def variant_configs(cfg: TrainConfig, with_text: bool = False) -> dict[Method, TrainConfig]:
    """Training configs of the fine-tuned methods; they differ only in loss mode and text use."""
    variants = {
        Method.CL: cfg.model_copy(update={"loss_mode": LossMode.CL, "use_text": False}),
        Method.HMCL: cfg.model_copy(update={"loss_mode": LossMode.HMCL, "use_text": False}),
    }
    if with_text:
        variants[Method.HMCL_TEXT] = cfg.model_copy(
            update={"loss_mode": LossMode.HMCL, "use_text": True}
        )
    return variants


def run_seed(
    ds: Dataset,
    split: SplitSpec,
    cfg_base: TrainConfig,
    seed: int,
    with_text: bool = False,
    ks: Sequence[int] = DEFAULT_KS,
) -> dict[Method, MetricsReport]:
    """Baseline plus every fine-tuned method for one seed, evaluated on the test patents."""
    cfg = cfg_base.model_copy(update={"seed": seed})
    test_split = build_eval_split(
        ds, split.test, cfg.queries_per_patent, np.random.default_rng(seed)
    )
    reports = {Method.BASELINE: evaluate(init_from_config(ds.d_in, cfg), test_split, ks=ks)}
    for method, variant in variant_configs(cfg, with_text).items():
        logger.info("seed %d: training %s.", seed, method.value)
        result = train(ds, split, variant)
        reports[method] = evaluate(result.params, test_split, ks=ks)
    return reports


def aggregate_runs(runs: Sequence[dict[Method, MetricsReport]]) -> list[ComparisonRow]:
    """Mean and population standard deviation over seeds, in method/level/metric/K order."""
    if not runs:
        raise ValidationError(message="run_comparison needs at least one seed.")
    rows: list[ComparisonRow] = []
    for method in runs[0]:
        per_seed = [_metric_values(run[method]) for run in runs]
        for idx, (level, metric, k, _) in enumerate(per_seed[0]):
            values = np.array([entries[idx][3] for entries in per_seed], dtype=np.float64)
            rows.append(
                ComparisonRow(
                    method=method,
                    level=level,
                    metric=metric,
                    k=k,
                    mean=float(values.mean()),
                    std=float(values.std()),
                    seeds=len(runs),
                )
            )
    return rows


def run_comparison(
    ds: Dataset,
    split: SplitSpec,
    cfg_base: TrainConfig,
    seeds: Sequence[int],
    with_text: bool = False,
    ks: Sequence[int] = DEFAULT_KS,
) -> list[ComparisonRow]:
    """Train CL and HMCL (and optionally HMCL+text) per seed and tabulate against Baseline.

    Seeds run on a thread pool capped by ``HIERCL_THREADS``; results are
    aggregated in seed-list order.
    """
    if not seeds:
        raise ValidationError(message="run_comparison needs at least one seed.")
    ks = check_ks(ks)
    workers = min(resolve_threads(), len(seeds))
    logger.info("Comparing methods over %d seeds with %d workers.", len(seeds), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        runs = list(
            pool.map(lambda s: run_seed(ds, split, cfg_base, s, with_text, ks), seeds)
        )
    return aggregate_runs(runs)


def comparison_table(rows: Sequence[ComparisonRow]) -> list[dict[str, Any]]:
    return [
        {
            "method": row.method.value,
            "level": row.level.value,
            "metric": row.metric,
            "K": "" if row.k is None else row.k,
            "mean": row.mean,
            "std": row.std,
            "seeds": row.seeds,
        }
        for row in rows
    ]


def write_comparison_csv(rows: Sequence[ComparisonRow], path: PathLike) -> None:
    write_csv(comparison_table(rows), COMPARISON_COLUMNS, path)


# ---------------------------------------------------------------------------
# Projections and curves
# ---------------------------------------------------------------------------


def project_subclasses(
    params: EncoderParams, ds: Dataset, subclasses: Sequence[int]
) -> list[ProjectionRow]:
    """Embed the records of the requested subclasses and project them onto two PCs.

    Raises:
        ValidationError: If a subclass code does not occur in ``ds``.
        DegenerateInputError: If the embeddings have no variance.
    """
    known = set(ds.subclasses())
    unknown = sorted(set(subclasses) - known)
    if unknown:
        raise ValidationError(message=f"Unknown subclass code(s): {unknown}.")
    wanted = set(subclasses)
    records = [r for r in ds.records if r.label.subclass in wanted]
    pca = pca2(embed_records(params, records))
    return [
        ProjectionRow(
            x=float(pca.projection[i, 0]),
            y=float(pca.projection[i, 1]),
            subclass=r.label.subclass,
            main_class=r.label.main_class,
            image_id=r.image_id,
        )
        for i, r in enumerate(records)
    ]


def write_projection_csv(rows: Sequence[ProjectionRow], path: PathLike) -> None:
    write_csv([row.model_dump() for row in rows], PROJECTION_COLUMNS, path)


def curves_mrr_acc(
    report: MetricsReport, method: Union[Method, str] = Method.HMCL
) -> list[dict[str, Any]]:
    """MRR@K and Acc@K per level as flat rows for external plotting."""
    name = method.value if isinstance(method, Method) else method
    rows: list[dict[str, Any]] = []
    for level in HierLevel:
        m = report.levels[level]
        for metric, values in (("MRR", m.mrr), ("Acc", m.acc)):
            for k in report.ks:
                rows.append(
                    {
                        "method": name,
                        "level": level.value,
                        "metric": metric,
                        "K": k,
                        "value": values[k],
                    }
                )
    return rows


def write_curves_csv(rows: list[dict[str, Any]], path: PathLike) -> None:
    write_csv(rows, CURVE_COLUMNS, path)


# ---------------------------------------------------------------------------
# Embedding geometry
# ---------------------------------------------------------------------------


class GeometryReport(BaseModel):
    """Mean pairwise cosine similarity grouped by how closely two records are related."""

    model_config = ConfigDict(frozen=True)

    within_subclass: Optional[float]
    cross_subclass: Optional[float]
    cross_main: Optional[float]
    pairs: int


def _masked_mean(values: np.ndarray, mask: np.ndarray) -> Optional[float]:
    if not mask.any():
        return None
    return float(values[mask].mean())


def embedding_geometry(params: EncoderParams, records: Sequence[ImageRecord]) -> GeometryReport:
    """Within-subclass, sibling-subclass and cross-main-class similarity of unit embeddings."""
    Z = embed_records(params, records)
    S = Z @ Z.T
    subclass = np.array([r.label.subclass for r in records])
    main = np.array([r.label.main_class for r in records])
    off_diag = ~np.eye(len(records), dtype=bool)
    same_sub = (subclass[:, None] == subclass[None, :]) & off_diag
    same_main = main[:, None] == main[None, :]
    return GeometryReport(
        within_subclass=_masked_mean(S, same_sub),
        cross_subclass=_masked_mean(S, same_main & ~same_sub & off_diag),
        cross_main=_masked_mean(S, ~same_main),
        pairs=int(off_diag.sum()),
    )


def subclass_centroids(
    params: EncoderParams, records: Sequence[ImageRecord]
) -> dict[int, np.ndarray]:
    """Mean unit embedding per subclass code."""
    Z = embed_records(params, records)
    groups: dict[int, list[int]] = {}
    for i, r in enumerate(records):
        groups.setdefault(r.label.subclass, []).append(i)
    return {code: Z[idx].mean(axis=0) for code, idx in sorted(groups.items())}
