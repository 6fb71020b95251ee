"""Proposal-free inference: scoring, tube linking, segment extraction, tube NMS.

Linking runs a Viterbi pass over the frames that hold at least one region
with c >= theta_keep, choosing one region per such frame and maximizing the
summed link reward R_ij = c_i + c_j − d(h_i^s, h_j^s) − d(h_i^t, h_j^t)
between consecutive chosen regions. Frames without a kept region become gaps,
which is how discontinuous tubes arise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import torch

from .config import ExperimentConfig, GroundingConfig
from .dstg_model import graph_tensors
from .featurize import RegionFeatures, featurize_dataset, featurize_sample
from .langenc import Vocabulary
from .metrics import box_iou, tube_viou
from .stgraph import DualGraph, build_dual_graph
from .synthdata import VideoSample
from .tube import Tube, frame_runs

TIE_EPS = 1e-9


def _as_numpy(x) -> np.ndarray:
    if torch.is_tensor(x):
        return x.detach().cpu().numpy()
    return np.asarray(x, dtype=float)


def _unit(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def _distance(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.linalg.norm(_unit(u) - _unit(v), axis=-1)) / 2


def link_reward(c_i: float, c_j: float, h_i, h_j) -> float:
    """R_ij for two scored regions; h_i and h_j carry h_s and h_t."""
    d_s = _distance(_as_numpy(h_i.h_s), _as_numpy(h_j.h_s))
    d_t = _distance(_as_numpy(h_i.h_t), _as_numpy(h_j.h_t))
    return float(c_i) + float(c_j) - d_s - d_t


class LinkScorer:
    """Precomputed unit embeddings so pairwise rewards are cheap."""

    def __init__(self, c, h_s, h_t):
        self.c = _as_numpy(c)
        self.us = _unit(_as_numpy(h_s))
        self.ut = _unit(_as_numpy(h_t))

    def distance(self, i: int, j: int) -> float:
        return (
            float(np.linalg.norm(self.us[i] - self.us[j])) / 2
            + float(np.linalg.norm(self.ut[i] - self.ut[j])) / 2
        )

    def reward(self, i: int, j: int) -> float:
        return float(self.c[i] + self.c[j]) - self.distance(i, j)

    def matrix(self, prev: list[int], cur: list[int]) -> np.ndarray:
        """Rewards (len(prev), len(cur))."""
        d_s = np.linalg.norm(self.us[prev][:, None, :] - self.us[cur][None, :, :], axis=-1) / 2
        d_t = np.linalg.norm(self.ut[prev][:, None, :] - self.ut[cur][None, :, :], axis=-1) / 2
        return self.c[prev][:, None] + self.c[cur][None, :] - d_s - d_t


def _viterbi(layers: list[list[int]], scorer: LinkScorer, order_key) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """
    Best cumulative reward of any chain ending at each node of each layer.

    Predecessors whose totals are within TIE_EPS of the best tie; a tie goes
    to the predecessor with the higher running total (the chain keeps its
    current region longest), then to the lower order_key.
    """
    best = [np.zeros(len(layers[0]))]
    back = [np.full(len(layers[0]), -1)]
    for k in range(1, len(layers)):
        total = best[-1][:, None] + scorer.matrix(layers[k - 1], layers[k])
        keys = np.array([order_key(n) for n in layers[k - 1]])
        choice = np.empty(len(layers[k]), dtype=int)
        for j in range(len(layers[k])):
            near = np.flatnonzero(total[:, j] >= total[:, j].max() - TIE_EPS)
            # lexsort's last key is primary
            choice[j] = near[np.lexsort((keys[near], -best[-1][near]))[0]]
        best.append(total[choice, np.arange(len(layers[k]))])
        back.append(choice)
    return best, back


def _backtrack(layers, back, end_pos: int) -> list[int]:
    path = [layers[-1][end_pos]]
    pos = end_pos
    for k in range(len(layers) - 1, 0, -1):
        pos = int(back[k][pos])
        path.append(layers[k - 1][pos])
    return path[::-1]


def link_path(layers: list[list[int]], scorer: LinkScorer, order_key=lambda n: n) -> tuple[list[int], float]:
    """
    One node per layer maximizing Σ R over consecutive layers.

    Returns:
        (nodes in layer order, total reward); an empty layer list gives ([], 0.0)
    """
    layers = [list(layer) for layer in layers if layer]
    if not layers:
        return [], 0.0
    best, back = _viterbi(layers, scorer, order_key)
    keys = np.array([order_key(n) for n in layers[-1]])
    end = int(np.lexsort((keys, -best[-1]))[0])
    return _backtrack(layers, back, end), float(best[-1][end])


def link_through(layers: list[list[int]], scorer: LinkScorer, seed_layer: int, seed: int, order_key=lambda n: n) -> tuple[list[int], float]:
    """
    Best chain constrained to pass through `seed` in layer `seed_layer`.

    Both halves are linked outward from the seed.
    """
    head_layers = [[seed]] + [list(l) for l in layers[:seed_layer]][::-1]
    tail_layers = [[seed]] + [list(l) for l in layers[seed_layer + 1:]]
    head_rev, head_score = link_path(head_layers, scorer, order_key)
    tail, tail_score = link_path(tail_layers, scorer, order_key)
    return head_rev[::-1] + tail[1:], head_score + tail_score


def _split_on_breaks(path: list[int], scorer: LinkScorer, max_distance: float, keep: int) -> list[int]:
    """Cut the path where consecutive nodes are farther apart than max_distance; keep the piece holding `keep`."""
    pieces = [[path[0]]]
    for prev, cur in zip(path, path[1:]):
        if scorer.distance(prev, cur) > max_distance:
            pieces.append([cur])
        else:
            pieces[-1].append(cur)
    for piece in pieces:
        if keep in piece:
            return piece
    return []


def build_tubes(scores, embeddings, graph: DualGraph, cfg: GroundingConfig) -> list[Tube]:
    """
    Seeded linking into candidate tubes (before NMS).

    Args:
        scores: c per node (N,)
        embeddings: (h_s, h_t) arrays, one row per node
        graph: supplies frame indices, region ids and boxes of the real nodes
        cfg: thresholds and seed count

    Seeds are taken in descending c among kept regions not yet covered by an
    earlier tube. Each seed's chain is cut at identity breaks; frame runs
    shorter than min_segment_len are dropped. Identical tubes are merged.
    """
    scorer = LinkScorer(scores, *embeddings)
    n = graph.num_real
    region_of = [int(r) for r in graph.region_ids[:n]]
    order_key = lambda node: region_of[node]

    kept = [i for i in range(n) if scorer.c[i] >= cfg.theta_keep]
    frames = sorted({int(graph.frame_idx[i]) for i in kept})
    layer_of_frame = {f: k for k, f in enumerate(frames)}
    layers: list[list[int]] = [[] for _ in frames]
    for i in sorted(kept, key=order_key):
        layers[layer_of_frame[int(graph.frame_idx[i])]].append(i)

    seeds = sorted(kept, key=lambda i: (-scorer.c[i], region_of[i]))
    covered: set[int] = set()
    tubes: list[Tube] = []
    seen: set[tuple] = set()
    used = 0
    for seed in seeds:
        if used >= cfg.num_seeds:
            break
        if seed in covered:
            continue
        used += 1
        path, _ = link_through(layers, scorer, layer_of_frame[int(graph.frame_idx[seed])], seed, order_key)
        piece = _split_on_breaks(path, scorer, cfg.max_link_distance, seed)
        covered.update(piece)

        runs = frame_runs([int(graph.frame_idx[i]) for i in piece])
        long_frames = {f for s, e in runs if e - s >= cfg.min_segment_len for f in range(s, e)}
        piece = [i for i in piece if int(graph.frame_idx[i]) in long_frames]
        if not piece:
            continue
        key = tuple(piece)
        if key in seen:
            continue
        seen.add(key)
        tubes.append(Tube(
            entries=[(int(graph.frame_idx[i]), region_of[i]) for i in piece],
            boxes=[tuple(float(v) for v in graph.boxes[i]) for i in piece],
            score=float(np.mean(scorer.c[piece])),
            link_reward_total=float(sum(scorer.reward(a, b) for a, b in zip(piece, piece[1:]))),
        ))
    return tubes


def tube_nms(tubes: list[Tube], threshold: float = 0.4) -> list[Tube]:
    """Greedy tube NMS; equal scores keep their input order."""
    ordered = sorted(tubes, key=lambda t: -t.score)
    kept: list[Tube] = []
    for tube in ordered:
        if all(tube_viou(tube, k) <= threshold for k in kept):
            kept.append(tube)
    return kept


@dataclass(slots=True)
class GroundingResult:
    video_id: str
    expression_idx: int
    tubes: list[Tube] = field(default_factory=list)
    scores: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "video_id": self.video_id,
            "expression_idx": self.expression_idx,
            "tubes": [t.to_dict() for t in self.tubes],
            "scores": {str(k): round(v, 6) for k, v in sorted(self.scores.items())},
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GroundingResult":
        return cls(
            video_id=str(data["video_id"]),
            expression_idx=int(data["expression_idx"]),
            tubes=[Tube.from_dict(t) for t in data.get("tubes", [])],
            scores={int(k): float(v) for k, v in data.get("scores", {}).items()},
        )


def tubes_from_scores(graph: DualGraph, c, h_s, h_t, cfg: GroundingConfig) -> list[Tube]:
    """Link and suppress: the inference tail shared by the model and oracle scores."""
    return tube_nms(build_tubes(c, (h_s, h_t), graph, cfg), cfg.nms_threshold)


def grounding_graphs(
    samples: list[VideoSample],
    cfg: ExperimentConfig,
    features: dict[str, RegionFeatures] | None = None,
    verbose: bool = False,
) -> list[DualGraph | None]:
    """One graph per video for inference; None for a video without detections."""
    nonempty = [s for s in samples if s.all_regions()]
    if features is None:
        features = featurize_dataset(nonempty, cfg.features, verbose=verbose)
    return [
        build_dual_graph(s, features[s.video_id], cfg.graph) if s.all_regions() else None
        for s in samples
    ]


def ground(
    sample: VideoSample,
    expression_idx: int,
    model,
    vocab: Vocabulary,
    cfg: ExperimentConfig,
    features: RegionFeatures | None = None,
    graph: DualGraph | None = None,
) -> GroundingResult:
    """
    Full inference for one (video, expression): features, graphs, model, linking, NMS.

    A video without detections, or an empty set of kept regions, gives a
    result with no tubes.
    """
    if not sample.all_regions():
        return GroundingResult(sample.video_id, expression_idx)
    if graph is None:
        features = features if features is not None else featurize_sample(sample, cfg.features)
        graph = build_dual_graph(sample, features, cfg.graph)
    case = sample.expressions[expression_idx]
    dtype = getattr(torch, cfg.train.dtype)

    model.eval()
    with torch.no_grad():
        token_ids = torch.tensor(vocab.encode(case.expression[: cfg.model.max_tokens]), dtype=torch.long)
        out = model(graph_tensors(graph, dtype), token_ids)
    c = out.c.numpy()
    tubes = tubes_from_scores(graph, c, out.h_s.numpy(), out.h_t.numpy(), cfg.grounding)
    scores = {int(graph.region_ids[i]): float(c[i]) for i in range(graph.num_real)}
    return GroundingResult(sample.video_id, expression_idx, tubes, scores)


def random_anchor_baseline(sample: VideoSample, expression_idx: int, seed: int) -> GroundingResult:
    """
    Anchor-window baseline: pick one window from the fixed anchor set, pick a
    random region in its first frame, and follow it by maximum box IoU.

    Anchors have lengths of 25%, 50% and 75% of the video, with starts every
    half window length.
    """
    rng = np.random.default_rng([seed, sample.seed, expression_idx])
    T = sample.num_frames
    anchors = []
    for frac in (0.25, 0.5, 0.75):
        length = max(1, int(round(frac * T)))
        step = max(1, length // 2)
        for start in range(0, T - length + 1, step):
            anchors.append((start, start + length))
    start, end = anchors[int(rng.integers(len(anchors)))]

    by_frame = {t: sorted(frame, key=lambda r: r.region_idx) for t, frame in enumerate(sample.regions)}
    entries, boxes = [], []
    current = None
    for t in range(start, end):
        frame = by_frame.get(t, [])
        if not frame:
            continue
        if current is None:
            current = frame[int(rng.integers(len(frame)))]
        else:
            ious = [box_iou(current.box, r.box) for r in frame]
            current = frame[int(np.argmax(ious))]
        entries.append((t, current.region_idx))
        boxes.append(current.box)
    tube = Tube(entries=entries, boxes=boxes, score=0.0)
    return GroundingResult(sample.video_id, expression_idx, [tube] if entries else [], {})
