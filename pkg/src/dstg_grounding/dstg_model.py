"""Decoupled spatial/temporal graph encoder and cross-modal decoder.

Encoder: two graph-attention branches over the spatial graph (appearance +
position) and the temporal graph (motion + position), two layers each. The
node embedding h is [h_s, h_t]. Motion enters through a signed log1p, which
keeps zero motion at zero and brings pixel-scale speeds near unit scale.

Decoder: two graph self-attention layers over the union of both adjacencies,
then attention over nodes conditioned on the sentence vector r, then the
per-node correspondence score c = sigmoid((W_h ĥ) · (W_r r)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .config import FeatureConfig, ModelConfig
from .featurize import GEOMETRY_DIM
from .langenc import LanguageEncoder
from .stgraph import DualGraph, neighbor_index


@dataclass(slots=True)
class EdgeAttention:
    e: torch.Tensor  # (N, K) raw scores
    alpha: torch.Tensor  # (N, K) normalized weights, 0 on empty slots


@dataclass(slots=True)
class NodeEmbedding:
    h_s: torch.Tensor
    h_t: torch.Tensor
    h: torch.Tensor
    gamma: float = 0.0
    h_attended: torch.Tensor | None = None


@dataclass(slots=True)
class GraphTensors:
    """Torch view of a DualGraph (features plus dense neighbor tables)."""

    appearance: torch.Tensor
    motion: torch.Tensor
    geometry: torch.Tensor
    valid: torch.Tensor
    spatial_idx: torch.Tensor
    spatial_mask: torch.Tensor
    temporal_idx: torch.Tensor
    temporal_mask: torch.Tensor
    union_idx: torch.Tensor
    union_mask: torch.Tensor

    @property
    def num_nodes(self) -> int:
        return int(self.valid.shape[0])


def graph_tensors(graph: DualGraph, dtype: torch.dtype = torch.float64) -> GraphTensors:
    s_idx, s_mask = neighbor_index(graph.spatial_adj)
    t_idx, t_mask = neighbor_index(graph.temporal_adj)
    u_idx, u_mask = neighbor_index(graph.union_adj())
    return GraphTensors(
        appearance=torch.as_tensor(np.asarray(graph.appearance), dtype=dtype),
        motion=torch.as_tensor(np.asarray(graph.motion), dtype=dtype),
        geometry=torch.as_tensor(np.asarray(graph.geometry), dtype=dtype),
        valid=torch.as_tensor(np.asarray(graph.valid_mask), dtype=torch.bool),
        spatial_idx=torch.as_tensor(s_idx),
        spatial_mask=torch.as_tensor(s_mask),
        temporal_idx=torch.as_tensor(t_idx),
        temporal_mask=torch.as_tensor(t_mask),
        union_idx=torch.as_tensor(u_idx),
        union_mask=torch.as_tensor(u_mask),
    )


# --- attention primitives ---------------------------------------------------

def edge_scores(node_i: torch.Tensor, neighbors: torch.Tensor, a: nn.Linear) -> torch.Tensor:
    """e_ij = a([x_i, x_j]) for every neighbor row x_j; node_i is (d,) or (..., d)."""
    xi = node_i.unsqueeze(-2).expand_as(neighbors)
    return a(torch.cat([xi, neighbors], dim=-1)).squeeze(-1)


def normalize_attention(e: torch.Tensor, mask: torch.Tensor | None = None, slope: float = 0.2) -> torch.Tensor:
    """
    Softmax of LeakyReLU(e) over the last axis, restricted to mask.

    Rows without any unmasked entry come out as all zeros.
    """
    z = F.leaky_relu(e, negative_slope=slope)
    if mask is None:
        return torch.softmax(z, dim=-1)
    has_any = mask.any(dim=-1, keepdim=True)
    z = z.masked_fill(~mask, float("-inf"))
    # keep empty rows finite so the backward pass stays NaN-free
    z = z.masked_fill(~has_any, 0.0)
    return torch.softmax(z, dim=-1) * mask.to(z.dtype)


def update_node(alpha: torch.Tensor, neighbor_inputs: torch.Tensor, residual: torch.Tensor | None = None) -> torch.Tensor:
    """h = sigmoid(Σ_j alpha_j x_j + residual)."""
    agg = (alpha.unsqueeze(-1) * neighbor_inputs).sum(dim=-2)
    if residual is not None:
        agg = agg + residual
    return torch.sigmoid(agg)


class GraphAttentionLayer(nn.Module):
    """
    One graph-attention layer with a pre-sigmoid residual.

    z = W x; e_ij = a([z_i, z_j]); alpha = masked softmax of LeakyReLU(e);
    h_i = sigmoid(Σ_j alpha_ij z_j + z_i). A node without neighbors reduces
    to sigmoid(z_i); padded nodes output zeros.
    """

    def __init__(self, in_dim: int, out_dim: int, slope: float = 0.2):
        super().__init__()
        self.W = nn.Linear(in_dim, out_dim, bias=False)
        self.a = nn.Linear(2 * out_dim, 1)
        self.slope = slope

    def forward(self, x, idx, mask, valid) -> tuple[torch.Tensor, EdgeAttention]:
        z = self.W(x)
        zj = z[idx]
        e = edge_scores(z, zj, self.a)
        alpha = normalize_attention(e, mask, self.slope)
        h = update_node(alpha, zj, residual=z)
        h = h * valid.unsqueeze(-1).to(h.dtype)
        return h, EdgeAttention(e=e, alpha=alpha)


class GraphBranch(nn.Module):
    """Stack of graph-attention layers with LeakyReLU between them."""

    def __init__(self, in_dim: int, hidden: int, num_layers: int = 2, slope: float = 0.2):
        super().__init__()
        dims = [in_dim] + [hidden] * num_layers
        self.layers = nn.ModuleList(
            GraphAttentionLayer(dims[k], dims[k + 1], slope) for k in range(num_layers)
        )
        self.slope = slope

    def forward(self, x, idx, mask, valid) -> tuple[torch.Tensor, list[EdgeAttention]]:
        attentions = []
        h = x
        for k, layer in enumerate(self.layers):
            h, att = layer(h, idx, mask, valid)
            attentions.append(att)
            if k < len(self.layers) - 1:
                h = F.leaky_relu(h, negative_slope=self.slope)
        return h, attentions


def signed_log1p(x: torch.Tensor) -> torch.Tensor:
    return torch.sign(x) * torch.log1p(x.abs())


def masked_node_softmax(scores: torch.Tensor, valid: torch.Tensor) -> torch.Tensor:
    """Softmax over the valid nodes; invalid nodes get 0."""
    z = scores.masked_fill(~valid, float("-inf"))
    return torch.softmax(z, dim=-1) * valid.to(scores.dtype)


def cross_modal_attend(
    h: torch.Tensor,
    r: torch.Tensor,
    compat: nn.Bilinear | None,
    valid: torch.Tensor,
    literal: bool = False,
) -> torch.Tensor:
    """
    Attention distribution γ over nodes from the bilinear compatibility a(h_i, r).

    compat=None gives uniform weights over the valid nodes. literal=True
    applies an extra sigmoid to the softmax output; γ then no longer sums to 1.
    """
    if compat is None:
        m = valid.sum().clamp(min=1).to(h.dtype)
        return valid.to(h.dtype) / m
    scores = compat(h, r.unsqueeze(0).expand(h.shape[0], -1)).squeeze(-1)
    gamma = masked_node_softmax(scores, valid)
    if literal:
        gamma = torch.sigmoid(gamma) * valid.to(h.dtype)
    return gamma


def correspondence_score(h_attended: torch.Tensor, r: torch.Tensor, W_h: nn.Linear, W_r: nn.Linear) -> torch.Tensor:
    """c = sigmoid((W_h ĥ) · (W_r r)), per row of h_attended."""
    return torch.sigmoid((W_h(h_attended) * W_r(r)).sum(dim=-1))


@dataclass(slots=True)
class ModelOutput:
    h_s: torch.Tensor  # (N, d_h)
    h_t: torch.Tensor  # (N, d_h)
    h: torch.Tensor  # (N, 2 d_h) encoder output
    h_dec: torch.Tensor  # (N, 2 d_h) after decoder self-attention
    gamma: torch.Tensor  # (N,)
    h_attended: torch.Tensor  # (N, 2 d_h)
    c: torch.Tensor  # (N,), 0 on padded nodes
    r: torch.Tensor  # (d_r,)
    valid: torch.Tensor  # (N,)


class DSTGModel(nn.Module):
    """Full grounding network; module switches follow ModelConfig (sgb, tgb, sa, ca)."""

    def __init__(self, model_cfg: ModelConfig, feat_cfg: FeatureConfig, vocab_size: int):
        super().__init__()
        model_cfg.validate()
        self.cfg = model_cfg
        d_h, d_p = model_cfg.d_h, feat_cfg.d_p
        self.pos = nn.Linear(GEOMETRY_DIM, d_p)
        self.spatial = GraphBranch(feat_cfg.d_a + d_p, d_h, model_cfg.num_layers, model_cfg.leaky_slope)
        self.temporal = GraphBranch(feat_cfg.d_m + d_p, d_h, model_cfg.num_layers, model_cfg.leaky_slope)
        self.decoder = GraphBranch(2 * d_h, 2 * d_h, 2, model_cfg.leaky_slope)
        self.compat = nn.Bilinear(2 * d_h, model_cfg.d_r, 1)
        self.W_h = nn.Linear(2 * d_h, model_cfg.d_c)
        self.W_r = nn.Linear(model_cfg.d_r, model_cfg.d_c)
        self.language = LanguageEncoder(
            vocab_size,
            word_dim=model_cfg.word_dim,
            d_r=model_cfg.d_r,
            dropout=model_cfg.dropout,
            max_tokens=model_cfg.max_tokens,
            pooling=model_cfg.sentence_pooling,
        )

    def encode(self, g: GraphTensors) -> tuple[torch.Tensor, torch.Tensor]:
        """(h_s, h_t); a disabled branch yields zeros."""
        pos = self.pos(g.geometry) * g.valid.unsqueeze(-1).to(g.geometry.dtype)
        n, d_h = g.num_nodes, self.cfg.d_h
        if self.cfg.sgb:
            h_s, _ = self.spatial(torch.cat([g.appearance, pos], dim=-1), g.spatial_idx, g.spatial_mask, g.valid)
        else:
            h_s = g.appearance.new_zeros(n, d_h)
        if self.cfg.tgb:
            h_t, _ = self.temporal(torch.cat([signed_log1p(g.motion), pos], dim=-1), g.temporal_idx, g.temporal_mask, g.valid)
        else:
            h_t = g.motion.new_zeros(n, d_h)
        return h_s, h_t

    def forward(self, g: GraphTensors, token_ids: torch.Tensor) -> ModelOutput:
        h_s, h_t = self.encode(g)
        h = torch.cat([h_s, h_t], dim=-1)
        if self.cfg.sa:
            h_dec, _ = self.decoder(h, g.union_idx, g.union_mask, g.valid)
        else:
            h_dec = h
        r = self.language(token_ids).r
        gamma = cross_modal_attend(h_dec, r, self.compat if self.cfg.ca else None, g.valid, self.cfg.literal_gamma)
        scale = g.valid.sum().to(h.dtype) if self.cfg.gamma_scale == "node_count" else 1.0
        h_att = scale * gamma.unsqueeze(-1) * h_dec
        c = correspondence_score(h_att, r, self.W_h, self.W_r) * g.valid.to(h.dtype)
        return ModelOutput(h_s, h_t, h, h_dec, gamma, h_att, c, r, g.valid)


def encode(graph: DualGraph, model: DSTGModel, dtype: torch.dtype = torch.float64) -> list[NodeEmbedding]:
    """Encoder embeddings per node (padded nodes included, as zeros)."""
    h_s, h_t = model.encode(graph_tensors(graph, dtype))
    return [NodeEmbedding(h_s[i], h_t[i], torch.cat([h_s[i], h_t[i]])) for i in range(h_s.shape[0])]


def node_embeddings(out: ModelOutput) -> list[NodeEmbedding]:
    return [
        NodeEmbedding(out.h_s[i], out.h_t[i], out.h[i], float(out.gamma[i]), out.h_attended[i])
        for i in range(out.h.shape[0])
    ]
