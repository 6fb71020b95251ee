"""Training objectives: matching loss, contrastive consistency loss, pair sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .errors import DatasetError
from .stgraph import DualGraph
from .synthdata import ReferringCase, VideoSample

C_MIN = 1e-7
C_MAX = 1.0 - 1e-7


def matching_loss(c, y) -> torch.Tensor:
    """Binary cross-entropy −y log c − (1−y) log(1−c), with c clipped to [1e-7, 1−1e-7]."""
    c = torch.as_tensor(c, dtype=torch.float64) if not torch.is_tensor(c) else c
    y = torch.as_tensor(y, dtype=c.dtype)
    c = c.clamp(C_MIN, C_MAX)
    return -(y * torch.log(c) + (1 - y) * torch.log(1 - c))


def embedding_distance(u: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    """
    ‖û − v̂‖ / 2 on L2-normalized inputs, in [0, 1]; broadcasts over leading axes.

    A zero vector normalizes to zero.
    """
    return torch.linalg.vector_norm(F.normalize(u, dim=-1) - F.normalize(v, dim=-1), dim=-1) / 2


def consistency_terms(
    a_s: torch.Tensor,
    a_t: torch.Tensor,
    pos_s: torch.Tensor,
    pos_t: torch.Tensor,
    neg_s: torch.Tensor,
    neg_t: torch.Tensor,
    spatial: bool = True,
    temporal: bool = True,
) -> torch.Tensor:
    """
    Four-term consistency loss of one anchor on stacked (m, d) / (n, d) tensors.

    Positives are pulled (mean distance), negatives pushed (mean of 1 − distance).
    An empty set contributes 0.
    """
    total = a_s.new_zeros(())
    branches = []
    if spatial:
        branches.append((a_s, pos_s, neg_s))
    if temporal:
        branches.append((a_t, pos_t, neg_t))
    for anchor, pos, neg in branches:
        if pos.shape[0] > 0:
            total = total + embedding_distance(anchor, pos).mean()
        if neg.shape[0] > 0:
            total = total + (1 - embedding_distance(anchor, neg)).mean()
    return total


def consistency_loss(anchor, positives: list, negatives: list, spatial: bool = True, temporal: bool = True) -> torch.Tensor:
    """L_d of one anchor given NodeEmbedding-like objects (attributes h_s and h_t)."""
    d_s = anchor.h_s.shape[-1]
    d_t = anchor.h_t.shape[-1]

    def stack(items, attr, dim):
        if not items:
            return anchor.h_s.new_zeros(0, dim)
        return torch.stack([getattr(x, attr) for x in items])

    return consistency_terms(
        anchor.h_s,
        anchor.h_t,
        stack(positives, "h_s", d_s),
        stack(positives, "h_t", d_t),
        stack(negatives, "h_s", d_s),
        stack(negatives, "h_t", d_t),
        spatial,
        temporal,
    )


@dataclass(slots=True)
class TrainingPair:
    anchor: int
    positives: list[int] = field(default_factory=list)
    negatives: list[int] = field(default_factory=list)


@dataclass(slots=True)
class LossBreakdown:
    L_c: torch.Tensor
    L_d: torch.Tensor
    L_total: torch.Tensor
    lambda_: float

    def as_floats(self) -> dict[str, float]:
        return {
            "L_c": float(self.L_c),
            "L_d": float(self.L_d),
            "L_total": float(self.L_total),
            "lambda": float(self.lambda_),
        }

    def is_finite(self) -> bool:
        return all(bool(torch.isfinite(t)) for t in (self.L_c, self.L_d, self.L_total))


def match_labels(sample: VideoSample, case: ReferringCase, graph: DualGraph) -> np.ndarray:
    """y per node: 1 for target-tube regions and their jittered duplicates, else 0."""
    targets = sample.target_regions(case)
    y = np.zeros(graph.N)
    for i, r in enumerate(graph.region_ids[: graph.num_real]):
        if int(r) in targets:
            y[i] = 1.0
    return y


def _draw(pool: list[int], k: int, rng: np.random.Generator) -> list[int]:
    if k <= 0 or not pool:
        return []
    picks = rng.choice(len(pool), size=k, replace=len(pool) < k)
    return [pool[int(p)] for p in picks]


def sample_pairs(
    sample: VideoSample,
    case: ReferringCase,
    graph: DualGraph,
    ratio: int,
    seed,
    max_positives: int = 8,
) -> list[TrainingPair]:
    """
    One TrainingPair per target node.

    Positives are other target nodes (same or co-target tube), at most
    max_positives. Each anchor gets ratio × max(1, #positives) negatives drawn
    from the spatial-distractor, temporal-distractor and background pools,
    with at least one spatial and one temporal distractor whenever those
    pools are non-empty. Draws are without replacement unless the pool is
    too small.

    Raises:
        DatasetError: no target region of the case is a node of the graph
    """
    rng = np.random.default_rng(seed)
    node_of = graph.node_of()
    regions = sample.region_map()
    targets = sorted(node_of[r] for r in sample.target_regions(case) if r in node_of)
    if not targets:
        raise DatasetError(f"{sample.video_id}: case has no target region in the graph")

    spatial_pool, temporal_pool, background_pool = [], [], []
    for r, node in sorted(node_of.items()):
        label = case.distractor_labels.get(r)
        if label == "spatial_distractor":
            spatial_pool.append(node)
        elif label == "temporal_distractor":
            temporal_pool.append(node)
        elif regions[r].source == "background":
            background_pool.append(node)
    everything = spatial_pool + temporal_pool + background_pool

    pairs = []
    for anchor in targets:
        others = [t for t in targets if t != anchor]
        if len(others) > max_positives:
            others = sorted(int(x) for x in rng.choice(others, size=max_positives, replace=False))
        n = ratio * max(1, len(others))
        negatives: list[int] = []
        if n > 0 and spatial_pool:
            negatives += _draw(spatial_pool, 1, rng)
        if n > 1 and temporal_pool:
            negatives += _draw(temporal_pool, 1, rng)
        rest = [x for x in everything if x not in negatives]
        remaining = n - len(negatives)
        negatives += _draw(rest if rest else everything, remaining, rng)
        pairs.append(TrainingPair(anchor=anchor, positives=others, negatives=negatives))
    return pairs


def total_loss(
    out,
    y: torch.Tensor,
    pairs: list[TrainingPair],
    lambda_: float,
    spatial: bool = True,
    temporal: bool = True,
) -> LossBreakdown:
    """
    L_total = Σ L_c / N + λ Σ L_d / N over the N nodes of the case's graph.

    Padded nodes contribute nothing to either sum; L_d is summed over anchors.
    """
    N = out.c.shape[0]
    valid = out.valid.to(out.c.dtype)
    L_c = (matching_loss(out.c, y) * valid).sum() / N

    L_d = out.c.new_zeros(())
    if lambda_ > 0 and (spatial or temporal):
        for pair in pairs:
            pos = torch.as_tensor(pair.positives, dtype=torch.long)
            neg = torch.as_tensor(pair.negatives, dtype=torch.long)
            L_d = L_d + consistency_terms(
                out.h_s[pair.anchor],
                out.h_t[pair.anchor],
                out.h_s[pos],
                out.h_t[pos],
                out.h_s[neg],
                out.h_t[neg],
                spatial,
                temporal,
            )
        L_d = L_d / N
    return LossBreakdown(L_c=L_c, L_d=L_d, L_total=L_c + lambda_ * L_d, lambda_=lambda_)
