"""hiercl: hierarchical multi-positive contrastive learning for design-image retrieval.

Trains a small projection encoder so that images of the same patent, the
same subclass and the same main class land progressively closer together,
then scores retrieval at every hierarchy level.

Quick start::

    from hiercl import SyntheticSpec, TrainConfig, generate_synthetic, split_by_patent, train

    ds = generate_synthetic(SyntheticSpec(seed=1))
    split = split_by_patent(ds, seed=1)
    result = train(ds, split, TrainConfig(batch_size=16, lr=5e-3, seed=1))
    print(result.log.best_val_map)
"""

from hiercl.analysis import (
    curves_mrr_acc,
    embedding_geometry,
    project_subclasses,
    run_comparison,
    subclass_centroids,
)
from hiercl.config import RunConfig
from hiercl.constants import VERSION as __version__
from hiercl.data import (
    Dataset,
    generate_synthetic,
    load_jsonl,
    load_split,
    save_jsonl,
    save_split,
    split_by_patent,
    text_features,
)
from hiercl.encoder import (
    EncoderParams,
    backward,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from hiercl.exceptions import (
    CheckpointError,
    ConfigError,
    DatasetError,
    DegenerateInputError,
    DimensionMismatchError,
    HierCLError,
    InsufficientDataError,
    NonFiniteError,
    TrainingError,
    ValidationError,
)
from hiercl.loss import (
    BatchEmbeddings,
    LossConfig,
    LossOutput,
    contrastive_loss,
    hier_loss,
    language_term,
    total_loss,
)
from hiercl.models import (
    ComparisonRow,
    HierLabel,
    HierLevel,
    ImageRecord,
    LossMode,
    MetricsReport,
    ScoreConfig,
    SplitSpec,
    SyntheticSpec,
    TrainConfig,
)
from hiercl.optim import AdamWState, adamw_step
from hiercl.retrieval import EmbeddingIndex, build_index, evaluate, rank
from hiercl.sampler import EvalSplit, TrainBatch, build_eval_split, sample_batch
from hiercl.taxonomy import relevance, relevance_matrix, relevant_mask
from hiercl.trainer import TrainResult, train

__all__ = [
    "__version__",
    # Taxonomy
    "HierLabel",
    "HierLevel",
    "ScoreConfig",
    "relevance",
    "relevance_matrix",
    "relevant_mask",
    # Data
    "ImageRecord",
    "Dataset",
    "SplitSpec",
    "SyntheticSpec",
    "generate_synthetic",
    "load_jsonl",
    "save_jsonl",
    "split_by_patent",
    "load_split",
    "save_split",
    "text_features",
    # Training
    "TrainBatch",
    "EvalSplit",
    "sample_batch",
    "build_eval_split",
    "BatchEmbeddings",
    "LossConfig",
    "LossOutput",
    "LossMode",
    "contrastive_loss",
    "hier_loss",
    "language_term",
    "total_loss",
    "EncoderParams",
    "init_params",
    "forward",
    "backward",
    "AdamWState",
    "adamw_step",
    "TrainConfig",
    "TrainResult",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    # Retrieval and analysis
    "EmbeddingIndex",
    "build_index",
    "rank",
    "evaluate",
    "MetricsReport",
    "ComparisonRow",
    "run_comparison",
    "project_subclasses",
    "curves_mrr_acc",
    "embedding_geometry",
    "subclass_centroids",
    "RunConfig",
    # Exceptions
    "HierCLError",
    "ValidationError",
    "ConfigError",
    "DimensionMismatchError",
    "DegenerateInputError",
    "NonFiniteError",
    "DatasetError",
    "InsufficientDataError",
    "CheckpointError",
    "TrainingError",
]
