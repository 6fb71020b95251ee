"""On-disk feature cache: SQLite file with a versioned meta table."""

from __future__ import annotations

import sqlite3
from pathlib import Path

import numpy as np

from .config import FeatureConfig, config_hash
from .errors import DatasetError
from .featurize import RegionFeatures

CACHE_FORMAT = "feat/1"
ARRAY_NAMES = ("region_ids", "frame_idx", "boxes", "appearance", "motion", "geometry")


class FeatureCache:
    """
    Per-video RegionFeatures keyed by (video_id, sample digest).

    Arrays are stored as little-endian float64 blobs with their shapes; the
    integer index arrays are converted back on read.
    """

    def __init__(self, path: Path, cfg: FeatureConfig):
        self.path = Path(path)
        self.cfg_hash = config_hash(cfg)
        self.conn = sqlite3.connect(str(self.path))
        self.conn.execute("PRAGMA journal_mode = WAL")
        self._create_schema()
        self._check_meta()

    def _create_schema(self):
        self.conn.execute("""
            CREATE TABLE IF NOT EXISTS meta (
                key TEXT PRIMARY KEY,
                value TEXT
            )
        """)
        self.conn.execute("""
            CREATE TABLE IF NOT EXISTS features (
                video_id TEXT,
                digest TEXT,
                name TEXT,
                shape TEXT,
                data BLOB,
                PRIMARY KEY (video_id, digest, name)
            )
        """)
        self.conn.commit()

    def _check_meta(self):
        rows = dict(self.conn.execute("SELECT key, value FROM meta").fetchall())
        if not rows:
            self.conn.executemany(
                "INSERT INTO meta (key, value) VALUES (?, ?)",
                [("format", CACHE_FORMAT), ("config_hash", self.cfg_hash)],
            )
            self.conn.commit()
            return
        if rows.get("format") != CACHE_FORMAT:
            raise DatasetError(f"{self.path}: unsupported cache format {rows.get('format')!r}")
        if rows.get("config_hash") != self.cfg_hash:
            raise DatasetError(f"{self.path}: cache was built with a different feature config")

    def get(self, video_id: str, digest: str = "") -> RegionFeatures | None:
        rows = self.conn.execute(
            "SELECT name, shape, data FROM features WHERE video_id = ? AND digest = ?",
            (video_id, digest),
        ).fetchall()
        if len(rows) != len(ARRAY_NAMES):
            return None
        arrays = {}
        for name, shape, data in rows:
            dims = tuple(int(d) for d in shape.split(",") if d)
            arr = np.frombuffer(data, dtype="<f8").reshape(dims)
            arrays[name] = arr.astype(np.int64) if name in ("region_ids", "frame_idx") else arr.copy()
        return RegionFeatures(video_id=video_id, **arrays)

    def put(self, feats: RegionFeatures, digest: str = ""):
        records = []
        for name, arr in feats.arrays().items():
            arr = np.ascontiguousarray(arr, dtype="<f8")
            records.append((
                feats.video_id,
                digest,
                name,
                ",".join(str(d) for d in arr.shape),
                arr.tobytes(),
            ))
        self.conn.executemany(
            "INSERT OR REPLACE INTO features (video_id, digest, name, shape, data) VALUES (?, ?, ?, ?, ?)",
            records,
        )
        self.conn.commit()

    def __len__(self) -> int:
        return self.conn.execute("SELECT COUNT(DISTINCT video_id || digest) FROM features").fetchone()[0]

    def close(self):
        self.conn.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
