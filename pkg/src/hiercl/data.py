"""Datasets: JSONL ingestion, patent-level splits, synthetic corpora and text features."""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict, model_validator

from hiercl._utils import PathLike, ensure_parent, seeded_hash
from hiercl.constants import (
    DEFAULT_SPLIT_RATIOS,
    FIRST_MAIN_CLASS,
    OBJECT_NAMES,
    SPLIT_RATIO_TOLERANCE,
    TEXT_FEATURE_DIM,
    TEXT_HASHES_PER_TOKEN,
    TEXT_TEMPLATE,
)
from hiercl.exceptions import (
    DatasetError,
    DimensionMismatchError,
    DuplicateRecordError,
    HierarchyError,
    InsufficientDataError,
    MalformedRecordError,
    ValidationError,
)
from hiercl.models import HierLabel, ImageRecord, SplitSpec, SyntheticSpec
from hiercl.numerics import DenseMatrix, Vector, l2_normalize

logger = logging.getLogger("hiercl")

_REQUIRED_KEYS = ("image_id", "patent_id", "subclass", "main_class", "features")


class Dataset(BaseModel):
    """Validated collection of image records with a uniform feature dimension."""

    model_config = ConfigDict(frozen=True)

    records: tuple[ImageRecord, ...]
    d_in: int

    @model_validator(mode="after")
    def validate_records(self) -> Dataset:
        checker = _RecordChecker()
        for line, record in enumerate(self.records, start=1):
            checker.add(record, line, expected_dim=self.d_in)
        return self

    @classmethod
    def from_records(cls, records: Iterable[ImageRecord]) -> Dataset:
        records = tuple(records)
        if not records:
            raise InsufficientDataError(message="A dataset needs at least one record.")
        return cls(records=records, d_in=len(records[0].features))

    def __len__(self) -> int:
        return len(self.records)

    def features(self, records: Optional[Sequence[ImageRecord]] = None) -> DenseMatrix:
        """Stack feature vectors (all records by default) into an n x d_in matrix."""
        chosen = self.records if records is None else records
        return np.array([r.features for r in chosen], dtype=np.float64).reshape(
            len(chosen), self.d_in
        )

    def by_patent(self) -> dict[str, list[ImageRecord]]:
        """Records grouped by patent, in dataset order."""
        groups: dict[str, list[ImageRecord]] = defaultdict(list)
        for record in self.records:
            groups[record.patent_id].append(record)
        return dict(groups)

    def patent_ids(self) -> list[str]:
        return list(self.by_patent())

    def subclasses(self) -> list[int]:
        return sorted({r.label.subclass for r in self.records})

    def main_classes(self) -> list[int]:
        return sorted({r.label.main_class for r in self.records})

    def select_patents(self, patent_ids: Iterable[str]) -> list[ImageRecord]:
        """Records whose patent is in ``patent_ids``, in dataset order."""
        wanted = set(patent_ids)
        return [r for r in self.records if r.patent_id in wanted]


class _RecordChecker:
    """Incremental dataset invariants: dimension, unique ids, hierarchy consistency."""

    def __init__(self) -> None:
        self._ids: set[str] = set()
        self._patents: dict[str, HierLabel] = {}

    def add(self, record: ImageRecord, line: int, expected_dim: int) -> None:
        if len(record.features) != expected_dim:
            raise DimensionMismatchError(
                message=f"line {line}: expected {expected_dim} features, "
                f"got {len(record.features)}."
            )
        if record.image_id in self._ids:
            raise DuplicateRecordError(
                message=f"duplicate image_id '{record.image_id}'.", line=line
            )
        self._ids.add(record.image_id)
        seen = self._patents.setdefault(record.patent_id, record.label)
        if seen != record.label:
            raise HierarchyError(
                message=f"patent '{record.patent_id}' is filed under subclass "
                f"{record.label.subclass}, earlier under {seen.subclass}.",
                line=line,
            )


# ---------------------------------------------------------------------------
# JSONL
# ---------------------------------------------------------------------------


def _parse_line(text: str, line: int) -> ImageRecord:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(message=f"invalid JSON ({exc.msg}).", line=line) from None
    if not isinstance(obj, dict):
        raise MalformedRecordError(message="expected a JSON object.", line=line)
    missing = [k for k in _REQUIRED_KEYS if k not in obj]
    if missing:
        raise MalformedRecordError(message=f"missing keys {missing}.", line=line)

    subclass, main_class = obj["subclass"], obj["main_class"]
    if isinstance(subclass, int) and isinstance(main_class, int):
        if subclass // 100 != main_class:
            raise HierarchyError(
                message=f"subclass {subclass} is not under main class {main_class}.",
                line=line,
            )
    try:
        return ImageRecord(
            image_id=obj["image_id"],
            label=HierLabel(
                main_class=main_class, subclass=subclass, patent_id=obj["patent_id"]
            ),
            features=obj["features"],
            text=obj.get("text"),
        )
    except pydantic.ValidationError as exc:
        reason = exc.errors()[0].get("msg", str(exc))
        raise MalformedRecordError(message=reason, line=line) from None


def load_jsonl(path: PathLike) -> Dataset:
    """Load and validate a dataset, one JSON object per line.

    Raises:
        MalformedRecordError: Bad JSON or fields.
        DimensionMismatchError: Feature length differs from the first record.
        HierarchyError: Subclass/main class prefix or patent consistency violated.
        DuplicateRecordError: Repeated image_id.
    """
    p = Path(path)
    if not p.is_file():
        raise DatasetError(message=f"dataset file '{p}' does not exist.")
    checker = _RecordChecker()
    records: list[ImageRecord] = []
    with p.open(encoding="utf-8") as fh:
        for line, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            record = _parse_line(text, line)
            expected = len(records[0].features) if records else len(record.features)
            checker.add(record, line, expected_dim=expected)
            records.append(record)
    if not records:
        raise InsufficientDataError(message=f"dataset file '{p}' holds no records.")
    ds = Dataset.model_construct(records=tuple(records), d_in=len(records[0].features))
    logger.info(
        "Loaded %d records (%d patents, d_in=%d) from %s.",
        len(ds),
        len(ds.by_patent()),
        ds.d_in,
        p,
    )
    return ds


def record_to_json(record: ImageRecord) -> dict[str, Any]:
    """Flat JSONL layout of one record."""
    obj: dict[str, Any] = {
        "image_id": record.image_id,
        "patent_id": record.label.patent_id,
        "subclass": record.label.subclass,
        "main_class": record.label.main_class,
        "features": list(record.features),
    }
    if record.text is not None:
        obj["text"] = record.text
    return obj


def save_jsonl(ds: Dataset, path: PathLike) -> None:
    """Write ``ds`` as JSONL; floats use shortest round-trip repr."""
    p = ensure_parent(path)
    with p.open("w", encoding="utf-8") as fh:
        for record in ds.records:
            fh.write(json.dumps(record_to_json(record), separators=(",", ":")) + "\n")


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------


def check_ratios(ratios: Sequence[float]) -> tuple[float, float, float]:
    """Validate train/val/test ratios.

    Raises:
        ValidationError: Wrong arity, negative entries, or a sum other than 1.
    """
    if len(ratios) != 3:
        raise ValidationError(message=f"Expected 3 split ratios, got {len(ratios)}.")
    if any(r < 0.0 for r in ratios):
        raise ValidationError(message=f"Split ratios must be non-negative, got {list(ratios)}.")
    if abs(sum(ratios) - 1.0) > SPLIT_RATIO_TOLERANCE:
        raise ValidationError(message=f"Split ratios must sum to 1, got {sum(ratios)!r}.")
    return (float(ratios[0]), float(ratios[1]), float(ratios[2]))


def split_by_patent(
    ds: Dataset,
    ratios: Sequence[float] = DEFAULT_SPLIT_RATIOS,
    seed: int = 0,
) -> SplitSpec:
    """Shuffle patents with a seeded RNG and cut them into train/val/test.

    Only patents with at least two images are shuffled; train and val get
    ``floor(ratio * P)`` of them and test the remainder. Single-image patents
    cannot be queried or paired, so they are appended to train.

    Raises:
        InsufficientDataError: Fewer than 3 patents with two or more images.
    """
    train_r, val_r, _ = check_ratios(ratios)
    groups = ds.by_patent()
    eligible = sorted(pid for pid, recs in groups.items() if len(recs) >= 2)
    singles = sorted(pid for pid, recs in groups.items() if len(recs) < 2)
    if len(eligible) < 3:
        raise InsufficientDataError(
            message=f"Need at least 3 patents with >= 2 images, found {len(eligible)}."
        )
    if singles:
        logger.warning("%d single-image patents assigned to train.", len(singles))

    rng = np.random.default_rng(seed)
    order = [eligible[i] for i in rng.permutation(len(eligible))]
    P = len(order)
    n_train = math.floor(train_r * P + SPLIT_RATIO_TOLERANCE)
    n_val = math.floor(val_r * P + SPLIT_RATIO_TOLERANCE)
    split = SplitSpec(
        train=order[:n_train] + singles,
        val=order[n_train : n_train + n_val],
        test=order[n_train + n_val :],
        seed=seed,
        ratios=(float(ratios[0]), float(ratios[1]), float(ratios[2])),
    )
    if not split.val:
        logger.warning("Validation split is empty (%d eligible patents).", P)
    logger.info(
        "Split %d patents into %d/%d/%d.", P, len(split.train), len(split.val), len(split.test)
    )
    return split


def save_split(split: SplitSpec, path: PathLike) -> None:
    p = ensure_parent(path)
    p.write_text(split.model_dump_json(indent=2) + "\n", encoding="utf-8")


def load_split(path: PathLike) -> SplitSpec:
    """Read a SplitSpec JSON file."""
    p = Path(path)
    if not p.is_file():
        raise DatasetError(message=f"split file '{p}' does not exist.")
    try:
        return SplitSpec.model_validate_json(p.read_text(encoding="utf-8"))
    except pydantic.ValidationError as exc:
        raise DatasetError(message=f"invalid split file '{p}': {exc.errors()[0]['msg']}") from None


def check_split(ds: Dataset, split: SplitSpec) -> None:
    """Every dataset patent must land in exactly one split, and vice versa.

    Raises:
        ValidationError: On unknown or unassigned patents.
    """
    known = set(ds.by_patent())
    assigned = set(split.train) | set(split.val) | set(split.test)
    unknown = sorted(assigned - known)
    if unknown:
        raise ValidationError(message=f"Split names unknown patents, e.g. '{unknown[0]}'.")
    missing = sorted(known - assigned)
    if missing:
        raise ValidationError(message=f"Patent '{missing[0]}' is in no split.")


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------


def object_name(subclass: int, index: int) -> str:
    """Deterministic object name for a subclass, e.g. ``seat-1402``."""
    return f"{OBJECT_NAMES[index % len(OBJECT_NAMES)]}-{subclass}"


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw a hierarchical Gaussian corpus.

    main-class mean ~ N(0, spread_main^2 I); each level below adds its own
    N(0, spread^2 I) offset; images scatter around their patent mean. Main
    classes are numbered from 10 so that subclass ``s`` of main class ``m``
    gets the four-digit code ``100 m + s`` (``1001``, ``1002``, ``1101``, ...).
    """
    rng = np.random.default_rng(spec.seed)
    d = spec.d_in
    records: list[ImageRecord] = []
    sub_index = 0
    for m in range(FIRST_MAIN_CLASS, FIRST_MAIN_CLASS + spec.main_classes):
        main_mean = rng.normal(0.0, spec.spread_main, d)
        for s in range(1, spec.subclasses_per_main + 1):
            subclass = 100 * m + s
            sub_mean = main_mean + rng.normal(0.0, spec.spread_sub, d)
            name = object_name(subclass, sub_index)
            sub_index += 1
            for p in range(1, spec.patents_per_subclass + 1):
                patent_id = f"{subclass}-{p:03d}"
                patent_mean = sub_mean + rng.normal(0.0, spec.spread_patent, d)
                label = HierLabel(main_class=m, subclass=subclass, patent_id=patent_id)
                for k in range(1, spec.images_per_patent + 1):
                    features = patent_mean + rng.normal(0.0, spec.spread_image, d)
                    records.append(
                        ImageRecord(
                            image_id=f"{patent_id}-{k}",
                            label=label,
                            features=tuple(float(x) for x in features),
                            text=name,
                        )
                    )
    ds = Dataset.from_records(records)
    logger.info(
        "Generated %d records: %d patents, %d subclasses, %d main classes.",
        len(ds),
        spec.main_classes * spec.subclasses_per_main * spec.patents_per_subclass,
        spec.main_classes * spec.subclasses_per_main,
        spec.main_classes,
    )
    return ds


# ---------------------------------------------------------------------------
# Text
# ---------------------------------------------------------------------------


def _tokenize(text: str) -> list[str]:
    return [t.strip(".,;:!?").lower() for t in text.split() if t.strip(".,;:!?")]


def text_features(text: str, d: int = TEXT_FEATURE_DIM, seed: int = 0) -> Vector:
    """Hashed bag-of-tokens embedding of the templated description of ``text``.

    Each token of ``"This is a patent image of a <text>."`` adds +-1 to
    several seeded hash buckets; the sum is l2-normalized.

    Raises:
        ValidationError: If ``text`` is empty.
    """
    if not text or not text.strip():
        raise ValidationError(message="text_features needs a non-empty string.")
    if d < 1:
        raise ValidationError(message=f"Text feature dimension must be >= 1, got {d}.")
    description = TEXT_TEMPLATE.format(name=text.strip())
    vec = np.zeros(d, dtype=np.float64)
    for token in _tokenize(description):
        for salt in range(TEXT_HASHES_PER_TOKEN):
            h = seeded_hash(token, seed, salt)
            sign = 1.0 if (h >> 63) & 1 else -1.0
            vec[h % d] += sign
    if not vec.any():
        # Signs cancelled in every bucket; fall back to one bucket of the whole description.
        vec[seeded_hash(description, seed, TEXT_HASHES_PER_TOKEN) % d] = 1.0
    return l2_normalize(vec)
