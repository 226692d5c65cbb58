"""Custom exceptions for hiercl."""

from __future__ import annotations

from typing import Optional


class HierCLError(Exception):
    """Base exception for all hiercl errors."""

    code: str = "error"

    def __init__(self, message: str = "", code: Optional[str] = None) -> None:
        self.message = message
        if code is not None:
            self.code = code
        super().__init__(message)


class ValidationError(HierCLError):
    """Raised when input data or parameters are invalid."""

    code = "invalid_input"

    def __init__(self, message: str = "Validation error.") -> None:
        super().__init__(message=message)


class ConfigError(HierCLError):
    """Raised when a config file, override or environment variable is unusable."""

    code = "config_error"

    def __init__(self, message: str = "Configuration error.") -> None:
        super().__init__(message=message)


class DimensionMismatchError(HierCLError):
    """Raised when array shapes do not compose."""

    code = "dimension_mismatch"

    def __init__(self, message: str = "Dimension mismatch.") -> None:
        super().__init__(message=message)


class DegenerateInputError(HierCLError):
    """Raised for zero vectors, rank-0 inputs and empty relevance rows."""

    code = "degenerate_input"

    def __init__(self, message: str = "Degenerate input.") -> None:
        super().__init__(message=message)


class NonFiniteError(HierCLError):
    """Raised when a gradient or value is NaN or infinite."""

    code = "non_finite"

    def __init__(self, message: str = "Non-finite value.") -> None:
        super().__init__(message=message)


class DatasetError(HierCLError):
    """Raised when a dataset file or record is invalid."""

    code = "dataset_error"

    def __init__(self, message: str = "Dataset error.", line: Optional[int] = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message=message)


class MalformedRecordError(DatasetError):
    """Raised when a JSONL line is not a well-formed record."""

    code = "malformed_record"


class HierarchyError(DatasetError):
    """Raised when labels contradict the class hierarchy."""

    code = "hierarchy_inconsistent"


class DuplicateRecordError(DatasetError):
    """Raised when an image_id occurs twice."""

    code = "duplicate_record"


class InsufficientDataError(HierCLError):
    """Raised when there are too few patents or images for an operation."""

    code = "insufficient_data"

    def __init__(self, message: str = "Insufficient data.") -> None:
        super().__init__(message=message)


class CheckpointError(HierCLError):
    """Base for checkpoint persistence errors."""

    code = "checkpoint_error"

    def __init__(self, message: str = "Checkpoint error.") -> None:
        super().__init__(message=message)


class CorruptCheckpointError(CheckpointError):
    """Raised when a checkpoint file cannot be parsed."""

    code = "checkpoint_corrupt"


class CheckpointVersionError(CheckpointError):
    """Raised when a checkpoint was written by an unsupported format version."""

    code = "checkpoint_version"


class TrainingError(HierCLError):
    """Raised when training diverges."""

    code = "training_failed"

    def __init__(self, message: str = "Training failed.") -> None:
        super().__init__(message=message)
