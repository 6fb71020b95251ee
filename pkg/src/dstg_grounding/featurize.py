"""Synthetic region features: appearance, motion and normalized geometry.

These stand in for detector and 3D-backbone features. Appearance is a fixed
random projection of one-hot attribute blocks; motion is a kinematic
descriptor over a short window of box centers; geometry is the 5-vector
(x0/W, y0/H, x1/W, y1/H, w*h/(W*H)) that the model's positional projection
consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from tqdm import tqdm

from .config import FeatureConfig
from .dataset import dataset_hash
from .errors import DatasetError
from .synthdata import CATEGORIES, COLORS, SIZES, TEXTURES, Appearance, VideoSample
from .tube import Box

ATTRIBUTE_DIM = len(CATEGORIES) + len(COLORS) + len(SIZES) + len(TEXTURES)
GEOMETRY_DIM = 5


def attribute_onehot(category: str | None, appearance: Appearance | None) -> np.ndarray:
    """Concatenated one-hot blocks (category, color, size, texture); zeros for background."""
    vec = np.zeros(ATTRIBUTE_DIM)
    if category is None or appearance is None:
        return vec
    offset = 0
    for value, vocab in (
        (category, CATEGORIES),
        (appearance.color, COLORS),
        (appearance.size, SIZES),
        (appearance.texture, TEXTURES),
    ):
        vec[offset + vocab.index(value)] = 1.0
        offset += len(vocab)
    return vec


@lru_cache(maxsize=16)
def _projection(projection_seed: int, d_a: int) -> np.ndarray:
    rng = np.random.default_rng(projection_seed)
    proj = rng.normal(0.0, 1.0 / math.sqrt(4), size=(ATTRIBUTE_DIM, d_a))
    proj.setflags(write=False)
    return proj


def make_appearance_feat(
    category: str | None,
    appearance: Appearance | None,
    cfg: FeatureConfig,
    seed,
) -> np.ndarray:
    """
    Appearance vector of a region.

    Args:
        category, appearance: object attributes (None for background regions)
        cfg: feature settings (d_a, noise_sigma, projection_seed)
        seed: anything np.random.default_rng accepts; drives the noise only
    """
    base = attribute_onehot(category, appearance) @ _projection(cfg.projection_seed, cfg.d_a)
    if cfg.noise_sigma == 0:
        return base
    rng = np.random.default_rng(seed)
    return base + rng.normal(0.0, cfg.noise_sigma, size=cfg.d_a)


def _center(box: Box) -> np.ndarray:
    return np.array([(box[0] + box[2]) / 2.0, (box[1] + box[3]) / 2.0])


def make_motion_feat(track_boxes: dict[int, Box], t: int, cfg: FeatureConfig) -> np.ndarray:
    """
    Kinematic descriptor of a track around frame t.

    Layout: [speed, heading, oscillation energy, mean vx, mean vy, vx_0, vy_0, ...],
    zero-padded or truncated to d_m. Velocities are finite differences of box
    centers between consecutive frames of the window centered at t; a step
    with a missing endpoint (video edge, occlusion) is zero and left out of
    the summary statistics.
    """
    if t not in track_boxes:
        raise DatasetError(f"Track has no box at frame {t}")
    half = cfg.motion_window // 2
    steps = []
    valid = []
    for f in range(t - half, t + half):
        if f in track_boxes and f + 1 in track_boxes:
            steps.append(_center(track_boxes[f + 1]) - _center(track_boxes[f]))
            valid.append(True)
        else:
            steps.append(np.zeros(2))
            valid.append(False)
    velocities = np.array(steps)
    used = velocities[np.array(valid)] if any(valid) else np.zeros((1, 2))

    mean_v = used.mean(axis=0)
    speed = float(np.linalg.norm(used, axis=1).mean())
    heading = math.atan2(mean_v[1], mean_v[0]) if speed > 0 else 0.0
    osc_energy = float(((used - mean_v) ** 2).sum(axis=1).mean())

    desc = np.concatenate([[speed, heading, osc_energy, mean_v[0], mean_v[1]], velocities.ravel()])
    out = np.zeros(cfg.d_m)
    n = min(cfg.d_m, desc.size)
    out[:n] = desc[:n]
    return out


def normalized_geometry(box: Box, width: int, height: int) -> np.ndarray:
    """(x0/W, y0/H, x1/W, y1/H, w*h/(W*H)), every entry in [0, 1]."""
    x0, y0, x1, y1 = box
    if not (x0 < x1 and y0 < y1):
        raise DatasetError(f"Degenerate box {box}")
    if width <= 0 or height <= 0:
        raise DatasetError(f"Invalid frame size {width}x{height}")
    return np.array([
        x0 / width,
        y0 / height,
        x1 / width,
        y1 / height,
        (x1 - x0) * (y1 - y0) / (width * height),
    ])


def make_pos_embed(
    box: Box,
    width: int,
    height: int,
    cfg: FeatureConfig,
    projection: Callable[[np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    """
    Positional embedding f(geometry) of length d_p.

    With no projection the identity map is used: the 5-vector is copied into
    the first slots and the rest is zero. DSTGModel applies the same map
    batched, with its learned `pos` layer as the projection.
    """
    geom = normalized_geometry(box, width, height)
    if projection is not None:
        return np.asarray(projection(geom), dtype=float)
    out = np.zeros(cfg.d_p)
    n = min(cfg.d_p, GEOMETRY_DIM)
    out[:n] = geom[:n]
    return out


@dataclass(slots=True)
class RegionFeatures:
    """Per-region feature arrays of one video, rows in region_idx order."""

    video_id: str
    region_ids: np.ndarray  # (n,)
    frame_idx: np.ndarray  # (n,)
    boxes: np.ndarray  # (n, 4)
    appearance: np.ndarray  # (n, d_a)
    motion: np.ndarray  # (n, d_m)
    geometry: np.ndarray  # (n, 5)

    def __len__(self) -> int:
        return int(self.region_ids.shape[0])

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "region_ids": self.region_ids,
            "frame_idx": self.frame_idx,
            "boxes": self.boxes,
            "appearance": self.appearance,
            "motion": self.motion,
            "geometry": self.geometry,
        }


def featurize_sample(sample: VideoSample, cfg: FeatureConfig) -> RegionFeatures:
    """
    Features for every region of a video.

    Noise is seeded per (video seed, region index) so a region's features do
    not depend on the order in which regions are visited.
    """
    regions = sample.all_regions()
    if not regions:
        raise DatasetError(f"{sample.video_id}: no regions to featurize")
    objects = sample.object_map()

    tracks: dict[int, dict[int, Box]] = {}
    for r in regions:
        if r.source == "ground_truth":
            tracks.setdefault(r.object_id, {})[r.frame_idx] = r.box

    appearance = np.zeros((len(regions), cfg.d_a))
    motion = np.zeros((len(regions), cfg.d_m))
    geometry = np.zeros((len(regions), GEOMETRY_DIM))
    for row, r in enumerate(regions):
        obj = objects.get(r.object_id) if r.object_id is not None else None
        appearance[row] = make_appearance_feat(
            obj.category if obj else None,
            obj.appearance if obj else None,
            cfg,
            [sample.seed, r.region_idx, 0],
        )
        if obj is not None and r.object_id in tracks:
            motion[row] = make_motion_feat(tracks[r.object_id], r.frame_idx, cfg)
        if cfg.noise_sigma > 0:
            motion[row] += np.random.default_rng([sample.seed, r.region_idx, 1]).normal(
                0.0, cfg.noise_sigma, size=cfg.d_m
            )
        geometry[row] = normalized_geometry(r.box, sample.width, sample.height)

    return RegionFeatures(
        video_id=sample.video_id,
        region_ids=np.array([r.region_idx for r in regions], dtype=np.int64),
        frame_idx=np.array([r.frame_idx for r in regions], dtype=np.int64),
        boxes=np.array([r.box for r in regions], dtype=float),
        appearance=appearance,
        motion=motion,
        geometry=geometry,
    )


def featurize_dataset(samples: list[VideoSample], cfg: FeatureConfig, cache=None, verbose: bool = True) -> dict[str, RegionFeatures]:
    """Featurize many videos, reading and filling an optional FeatureCache."""
    out: dict[str, RegionFeatures] = {}
    for sample in tqdm(samples, desc="Featurizing", unit="video", disable=not verbose):
        digest = dataset_hash([sample]) if cache is not None else ""
        feats = cache.get(sample.video_id, digest) if cache is not None else None
        if feats is None:
            feats = featurize_sample(sample, cfg)
            if cache is not None:
                cache.put(feats, digest)
        out[sample.video_id] = feats
    return out
