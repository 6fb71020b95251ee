"""Run manifests embedded in every artifact file."""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from . import __version__
from .config import config_hash


@dataclass(slots=True)
class RunManifest:
    command: str
    version: str = __version__
    config_hash: str | None = None
    dataset_hash: str | None = None
    checkpoint_hash: str | None = None
    seed: int | None = None
    created_at: str = ""

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunManifest":
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**known)


def build_timestamp() -> str:
    """
    UTC timestamp for a manifest.

    SOURCE_DATE_EPOCH pins the value so repeated runs produce identical files.
    """
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    seconds = int(epoch) if epoch and epoch.strip().isdigit() else int(time.time())
    return datetime.fromtimestamp(seconds, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def make_manifest(
    command: str,
    config=None,
    dataset_hash: str | None = None,
    checkpoint_hash: str | None = None,
    seed: int | None = None,
) -> RunManifest:
    return RunManifest(
        command=command,
        config_hash=config_hash(config) if config is not None else None,
        dataset_hash=dataset_hash,
        checkpoint_hash=checkpoint_hash,
        seed=seed,
        created_at=build_timestamp(),
    )


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def file_hash(path: Path) -> str:
    """SHA-256 of a file's bytes."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()
