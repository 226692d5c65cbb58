"""hiercl constants and default configuration."""

from __future__ import annotations

VERSION: str = "0.1.0"

# Relevance scalars for same patent / same subclass / same main class.
DEFAULT_S_PATENT: float = 1.0
DEFAULT_S_SUBCLASS: float = 0.35
DEFAULT_S_MAIN: float = 0.2

DEFAULT_TAU: float = 0.1
DEFAULT_LAMBDA: float = 0.2

DEFAULT_LR: float = 1e-4
DEFAULT_WEIGHT_DECAY: float = 0.01
ADAMW_BETA1: float = 0.9
ADAMW_BETA2: float = 0.999
ADAMW_EPS: float = 1e-8

DEFAULT_BATCH_PATENTS: int = 64
DEFAULT_MAX_EPOCHS: int = 20
DEFAULT_PATIENCE: int = 3

DEFAULT_EMBED_DIM: int = 64
DEFAULT_HIDDEN_DIM: int = 128
DEFAULT_NUM_LAYERS: int = 1

DEFAULT_NOISE_PROB: float = 0.2
DEFAULT_NOISE_SIGMA: float = 0.05

DEFAULT_SPLIT_RATIOS: tuple[float, float, float] = (0.7225, 0.1275, 0.15)
SPLIT_RATIO_TOLERANCE: float = 1e-9

DEFAULT_KS: tuple[int, ...] = (1, 5, 10, 20)
DEFAULT_QUERIES_PER_PATENT: int = 2

# Default synthetic corpus: 8 main classes x 2 subclasses x 6 patents x 4 images.
DEFAULT_MAIN_CLASSES: int = 8
DEFAULT_SUBCLASSES_PER_MAIN: int = 2
DEFAULT_PATENTS_PER_SUBCLASS: int = 6
DEFAULT_IMAGES_PER_PATENT: int = 4
DEFAULT_D_IN: int = 32
DEFAULT_SPREAD_MAIN: float = 1.0
DEFAULT_SPREAD_SUB: float = 0.6
DEFAULT_SPREAD_PATENT: float = 0.5
DEFAULT_SPREAD_IMAGE: float = 0.9

# Main classes are numbered from here so subclass codes have four digits.
FIRST_MAIN_CLASS: int = 10

# Training settings sized for the default synthetic corpus (about 69 train
# patents); with the defaults above an epoch there is a single AdamW step.
DESK_LR: float = 1e-2
DESK_BATCH_PATENTS: int = 16
DESK_EMBED_DIM: int = 16
DESK_MAX_EPOCHS: int = 40
DESK_PATIENCE: int = 8

TEXT_TEMPLATE: str = "This is a patent image of a {name}."
TEXT_FEATURE_DIM: int = 256
TEXT_HASHES_PER_TOKEN: int = 3

OBJECT_NAMES: list[str] = [
    "seat",
    "bed",
    "table",
    "lamp",
    "bottle",
    "chair",
    "cup",
    "shoe",
    "watch",
    "handle",
    "vehicle",
    "fan",
    "brush",
    "phone",
    "screen",
    "toy",
]

CHECKPOINT_FORMAT_VERSION: int = 1

THREADS_ENV_VAR: str = "HIERCL_THREADS"

NORM_EPS: float = 1e-12
