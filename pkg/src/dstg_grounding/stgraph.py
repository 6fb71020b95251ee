"""Spatial and temporal region graphs over a fixed node budget."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import GraphConfig
from .errors import GraphError
from .featurize import RegionFeatures
from .metrics import box_iou


@dataclass(slots=True)
class DualGraph:
    """
    Node i is row i of the feature arrays; rows at or past num_real are padding.

    Adjacency lists are directed (i attends over its neighbors) and never
    contain i itself or a padded node.
    """

    video_id: str
    N: int
    num_real: int
    region_ids: np.ndarray  # (N,), -1 on padding
    frame_idx: np.ndarray  # (N,), -1 on padding
    boxes: np.ndarray  # (N, 4)
    appearance: np.ndarray  # (N, d_a)
    motion: np.ndarray  # (N, d_m)
    geometry: np.ndarray  # (N, 5)
    valid_mask: np.ndarray  # (N,) bool
    spatial_adj: list[list[int]] = field(default_factory=list)
    temporal_adj: list[list[int]] = field(default_factory=list)

    def node_of(self) -> dict[int, int]:
        """region_idx → node index for the real nodes."""
        return {int(r): i for i, r in enumerate(self.region_ids[: self.num_real])}

    def union_adj(self) -> list[list[int]]:
        return [sorted(set(s) | set(t)) for s, t in zip(self.spatial_adj, self.temporal_adj)]

    def to_json(self) -> dict:
        return {
            "video_id": self.video_id,
            "N": self.N,
            "num_real": self.num_real,
            "region_ids": [int(r) for r in self.region_ids],
            "valid_mask": [bool(v) for v in self.valid_mask],
            "spatial_adj": self.spatial_adj,
            "temporal_adj": self.temporal_adj,
        }


def neighbor_index(adj: list[list[int]], k: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Dense (N, K) neighbor indices with a boolean mask.

    Empty slots point at node 0 and are masked out.
    """
    k = k if k is not None else max((len(a) for a in adj), default=0)
    k = max(k, 1)
    idx = np.zeros((len(adj), k), dtype=np.int64)
    mask = np.zeros((len(adj), k), dtype=bool)
    for i, nbrs in enumerate(adj):
        idx[i, : len(nbrs)] = nbrs
        mask[i, : len(nbrs)] = True
    return idx, mask


def _centers(boxes: np.ndarray) -> np.ndarray:
    return np.stack([(boxes[:, 0] + boxes[:, 2]) / 2, (boxes[:, 1] + boxes[:, 3]) / 2], axis=1)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def spatial_neighbors(frame_idx: np.ndarray, boxes: np.ndarray, region_ids: np.ndarray, k: int) -> list[list[int]]:
    """The k same-frame nodes with the smallest center distance (ties: lower region index)."""
    centers = _centers(boxes)
    by_frame: dict[int, list[int]] = {}
    for i, f in enumerate(frame_idx):
        by_frame.setdefault(int(f), []).append(i)
    adj = []
    for i, f in enumerate(frame_idx):
        others = [j for j in by_frame[int(f)] if j != i]
        dist = {j: float(np.linalg.norm(centers[i] - centers[j])) for j in others}
        others.sort(key=lambda j: (dist[j], int(region_ids[j])))
        adj.append(others[:k])
    return adj


def temporal_neighbors(
    frame_idx: np.ndarray,
    boxes: np.ndarray,
    region_ids: np.ndarray,
    motion: np.ndarray,
    cfg: GraphConfig,
) -> list[list[int]]:
    """
    The k_temporal nodes within ±temporal_window frames (other than the node's
    own) with the highest affinity; ties go to the smaller |Δt|, then the
    lower region index. Zero-affinity candidates still qualify.
    """
    by_frame: dict[int, list[int]] = {}
    for i, f in enumerate(frame_idx):
        by_frame.setdefault(int(f), []).append(i)
    adj = []
    for i, f in enumerate(frame_idx):
        f = int(f)
        ranked = []
        for dt in range(1, cfg.temporal_window + 1):
            for g in (f - dt, f + dt):
                for j in by_frame.get(g, []):
                    if cfg.temporal_affinity == "feature":
                        aff = _cosine(motion[i], motion[j])
                    else:
                        aff = box_iou(tuple(boxes[i]), tuple(boxes[j]))
                    ranked.append((-aff, dt, int(region_ids[j]), j))
        ranked.sort()
        adj.append([j for *_, j in ranked[: cfg.k_temporal]])
    return adj


def build_dual_graph(sample, features: RegionFeatures, cfg: GraphConfig) -> DualGraph:
    """
    Spatial and temporal adjacency over a video's regions, padded to the node budget.

    Raises:
        GraphError: no regions, or more regions than cfg.node_budget
    """
    n = len(features)
    if n == 0:
        raise GraphError(f"{features.video_id}: sample has no regions")
    if sample is not None and sample.video_id != features.video_id:
        raise GraphError(f"Features of {features.video_id} passed for {sample.video_id}")
    cfg.validate()

    graph = DualGraph(
        video_id=features.video_id,
        N=n,
        num_real=n,
        region_ids=features.region_ids.astype(np.int64),
        frame_idx=features.frame_idx.astype(np.int64),
        boxes=features.boxes.astype(float),
        appearance=features.appearance,
        motion=features.motion,
        geometry=features.geometry,
        valid_mask=np.ones(n, dtype=bool),
        spatial_adj=spatial_neighbors(features.frame_idx, features.boxes, features.region_ids, cfg.k_spatial),
        temporal_adj=temporal_neighbors(
            features.frame_idx, features.boxes, features.region_ids, features.motion, cfg
        ),
    )
    return pad_to_budget(graph, cfg.node_budget)


def pad_to_budget(graph: DualGraph, N: int) -> DualGraph:
    """Append masked nodes until the graph has exactly N nodes."""
    current = len(graph.valid_mask)
    if current > N:
        raise GraphError(f"{graph.video_id}: {current} nodes exceed the node budget {N}")
    extra = N - current
    if extra == 0:
        return replace(graph, N=N)

    def pad(arr: np.ndarray, fill) -> np.ndarray:
        tail = np.full((extra, *arr.shape[1:]), fill, dtype=arr.dtype)
        return np.concatenate([arr, tail], axis=0)

    return replace(
        graph,
        N=N,
        region_ids=pad(graph.region_ids, -1),
        frame_idx=pad(graph.frame_idx, -1),
        boxes=pad(graph.boxes, 0.0),
        appearance=pad(graph.appearance, 0.0),
        motion=pad(graph.motion, 0.0),
        geometry=pad(graph.geometry, 0.0),
        valid_mask=pad(graph.valid_mask, False),
        spatial_adj=[list(a) for a in graph.spatial_adj] + [[] for _ in range(extra)],
        temporal_adj=[list(a) for a in graph.temporal_adj] + [[] for _ in range(extra)],
    )


def dump_graph(graph: DualGraph, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{graph.video_id}.graph.json"
    path.write_text(json.dumps(graph.to_json(), sort_keys=True) + "\n", encoding="utf-8")
    return path
