"""Internal utility functions for hiercl."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Union

import pandas as pd

from hiercl.constants import THREADS_ENV_VAR
from hiercl.exceptions import ConfigError

PathLike = Union[str, "os.PathLike[str]"]


def canonical_json(data: Any) -> str:
    """Serialize ``data`` as canonical JSON (sorted keys, no whitespace).

    Pydantic models are dumped in JSON mode first.
    """
    if hasattr(data, "model_dump"):
        data = data.model_dump(mode="json", by_alias=True)
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def hash_data(data: Any) -> str:
    """Hex SHA-256 of the canonical JSON form of ``data`` (bytes/str hashed directly)."""
    if isinstance(data, bytes):
        return hashlib.sha256(data).hexdigest()
    if isinstance(data, str):
        return hashlib.sha256(data.encode("utf-8")).hexdigest()
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def seeded_hash(token: str, seed: int, salt: int = 0) -> int:
    """64-bit integer hash of ``token`` under ``(seed, salt)``, stable across runs."""
    digest = hashlib.blake2b(
        token.encode("utf-8"),
        digest_size=8,
        key=f"{seed}:{salt}".encode("utf-8"),
    ).digest()
    return int.from_bytes(digest, "big")


def resolve_threads() -> int:
    """Worker cap from ``HIERCL_THREADS`` (default: available cores).

    Raises:
        ConfigError: If the variable is set but not a positive integer.
    """
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(message=f"{THREADS_ENV_VAR} must be an integer, got '{raw}'.") from None
    if value < 1:
        raise ConfigError(message=f"{THREADS_ENV_VAR} must be >= 1, got {value}.")
    return value


def ensure_parent(path: PathLike) -> Path:
    """Create the parent directory of ``path`` if needed and return it as a Path."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def write_json(data: Any, path: PathLike) -> None:
    """Write a pydantic model or JSON-able object, pretty-printed."""
    p = ensure_parent(path)
    if hasattr(data, "model_dump_json"):
        text = data.model_dump_json(indent=2, by_alias=True)
    else:
        text = json.dumps(data, indent=2)
    p.write_text(text + "\n", encoding="utf-8")


def write_csv(rows: list[dict[str, Any]], columns: list[str], path: PathLike) -> None:
    """Write ``rows`` as CSV with a fixed column order."""
    p = ensure_parent(path)
    frame = pd.DataFrame(rows, columns=columns)
    frame.to_csv(p, index=False, lineterminator="\n")
