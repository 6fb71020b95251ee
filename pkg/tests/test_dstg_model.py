"""Tests for graph attention, the encoder branches and the cross-modal decoder."""

import dataclasses

import numpy as np
import pytest
import torch

from dstg_grounding.config import ModelConfig
from dstg_grounding.dstg_model import (
    DSTGModel,
    GraphAttentionLayer,
    correspondence_score,
    cross_modal_attend,
    edge_scores,
    encode,
    graph_tensors,
    masked_node_softmax,
    node_embeddings,
    normalize_attention,
    update_node,
)
from dstg_grounding.errors import ConfigError
from dstg_grounding.stgraph import neighbor_index, pad_to_budget
from dstg_grounding.trainer import tiny_instance

TOKENS = torch.tensor([2, 3, 4, 5], dtype=torch.long)


def _model(changes=None, pad_to=10):
    """Float64 model on the tiny instance, padded with two masked nodes."""
    cfg, graph, _, _, vocab_size = tiny_instance(0)
    model_cfg = dataclasses.replace(cfg.model, **(changes or {}))
    torch.manual_seed(0)
    model = DSTGModel(model_cfg, cfg.features, vocab_size).double()
    model.eval()
    graph = pad_to_budget(graph, pad_to)
    return model, graph, graph_tensors(graph, torch.float64)


def _random_adjacency(rng, n):
    adj = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        k = int(rng.integers(0, min(4, len(others)) + 1))
        adj.append(sorted(int(j) for j in rng.choice(others, size=k, replace=False)) if k else [])
    return adj


class TestAttentionPrimitives:
    """Test masked attention normalization."""

    def test_rows_sum_to_one(self):
        """Rows with neighbors sum to 1; empty rows and masked slots are 0, over 1000 graphs."""
        rng = np.random.default_rng(0)
        torch.manual_seed(0)
        layer = GraphAttentionLayer(3, 4).double()
        for _ in range(1000):
            n = int(rng.integers(1, 8))
            idx, mask = neighbor_index(_random_adjacency(rng, n))
            x = torch.as_tensor(rng.normal(size=(n, 3)))
            valid = torch.ones(n, dtype=torch.bool)
            _, att = layer(x, torch.as_tensor(idx), torch.as_tensor(mask), valid)
            sums = att.alpha.sum(dim=-1)
            has = torch.as_tensor(mask.any(axis=1))
            assert torch.allclose(sums[has], torch.ones(int(has.sum()), dtype=torch.float64))
            assert (sums[~has] == 0).all()
            assert (att.alpha[~torch.as_tensor(mask)] == 0).all()

    def test_unmasked_softmax(self):
        """Without a mask the weights are a softmax of LeakyReLU scores."""
        e = torch.tensor([[1.0, -1.0]], dtype=torch.float64)
        alpha = normalize_attention(e, slope=0.2)
        expected = torch.softmax(torch.tensor([[1.0, -0.2]], dtype=torch.float64), dim=-1)
        assert torch.allclose(alpha, expected)

    def test_empty_row_gradient_finite(self):
        """An all-masked row has a finite gradient."""
        e = torch.zeros(2, 3, dtype=torch.float64, requires_grad=True)
        mask = torch.tensor([[True, False, False], [False, False, False]])
        normalize_attention(e, mask).sum().backward()
        assert torch.isfinite(e.grad).all()

    def test_node_without_neighbors(self):
        """A node with no neighbors reduces to sigmoid(W x); padded nodes are zero."""
        torch.manual_seed(1)
        layer = GraphAttentionLayer(2, 3).double()
        x = torch.tensor([[0.5, -1.0], [1.0, 2.0]], dtype=torch.float64)
        idx, mask = neighbor_index([[], []])
        valid = torch.tensor([True, False])
        h, _ = layer(x, torch.as_tensor(idx), torch.as_tensor(mask), valid)
        assert torch.allclose(h[0], torch.sigmoid(layer.W(x[0])))
        assert (h[1] == 0).all()

    def test_masked_node_softmax(self):
        """Invalid nodes get no weight."""
        gamma = masked_node_softmax(torch.tensor([1.0, 5.0, 2.0], dtype=torch.float64),
                                    torch.tensor([True, False, True]))
        assert gamma[1] == 0
        assert float(gamma.sum()) == pytest.approx(1.0)

    def test_edge_scores_by_hand(self):
        """e_ij is the linear score of the concatenated pair."""
        a = torch.nn.Linear(4, 1).double()
        with torch.no_grad():
            a.weight.copy_(torch.tensor([[1.0, 2.0, -1.0, 0.5]], dtype=torch.float64))
            a.bias.fill_(0.25)
        xi = torch.tensor([1.0, -1.0], dtype=torch.float64)
        neighbors = torch.tensor([[2.0, 0.0], [0.0, 4.0]], dtype=torch.float64)
        e = edge_scores(xi, neighbors, a)
        # 1 - 2 - 2 + 0 + 0.25 and 1 - 2 - 0 + 2 + 0.25
        assert torch.allclose(e, torch.tensor([-2.75, 1.25], dtype=torch.float64))

    def test_update_node_by_hand(self):
        """h is the sigmoid of the weighted neighbor sum plus the residual."""
        alpha = torch.tensor([0.25, 0.75], dtype=torch.float64)
        x = torch.tensor([[4.0, 0.0], [0.0, 2.0]], dtype=torch.float64)
        assert torch.allclose(update_node(alpha, x), torch.sigmoid(torch.tensor([1.0, 1.5], dtype=torch.float64)))
        residual = torch.tensor([-1.0, 0.5], dtype=torch.float64)
        assert torch.allclose(update_node(alpha, x, residual),
                              torch.sigmoid(torch.tensor([0.0, 2.0], dtype=torch.float64)))

    def test_correspondence_score_by_hand(self):
        """c is the sigmoid of the projected dot product, per row."""
        torch.manual_seed(2)
        W_h = torch.nn.Linear(3, 2).double()
        W_r = torch.nn.Linear(4, 2).double()
        h = torch.rand(5, 3, dtype=torch.float64)
        r = torch.rand(4, dtype=torch.float64)
        c = correspondence_score(h, r, W_h, W_r)
        assert c.shape == (5,)
        for i in range(5):
            assert float(c[i]) == pytest.approx(float(torch.sigmoid(W_h(h[i]) @ W_r(r))))


class TestDSTGModel:
    """Test the full forward pass and its module switches."""

    def test_outputs(self):
        """c lies in (0, 1) on real nodes and is 0 on padding; γ sums to 1."""
        model, graph, g = _model()
        out = model(g, TOKENS)
        real = graph.num_real
        assert out.c.shape == (10,)
        assert ((out.c[:real] > 0) & (out.c[:real] < 1)).all()
        assert (out.c[real:] == 0).all()
        assert float(out.gamma.sum()) == pytest.approx(1.0)
        assert (out.gamma[real:] == 0).all()
        assert out.h.shape == (10, 8)
        assert torch.equal(out.h, torch.cat([out.h_s, out.h_t], dim=-1))

    def test_padded_nodes_do_not_leak(self):
        """Adding padding leaves the real nodes' scores unchanged."""
        model, _, g_small = _model(pad_to=8)
        _, _, g_big = _model(pad_to=12)
        c_small = model(g_small, TOKENS).c
        c_big = model(g_big, TOKENS).c
        # γ is scaled by the valid-node count, which padding does not change
        assert torch.allclose(c_small, c_big[:8])

    def test_without_cross_attention(self):
        """With ca off γ is uniform and does not depend on the expression."""
        model, graph, g = _model({"ca": False})
        a = model(g, TOKENS)
        b = model(g, torch.tensor([5, 5, 2], dtype=torch.long))
        expected = torch.zeros(10, dtype=torch.float64)
        expected[: graph.num_real] = 1.0 / graph.num_real
        assert torch.allclose(a.gamma, expected)
        assert torch.equal(a.gamma, b.gamma)
        assert not torch.allclose(a.c, b.c)

    def test_without_cross_attention_compat_unused(self):
        """With ca off the expression reaches c only through the matching head."""
        model, _, g = _model({"ca": False})
        a = model(g, TOKENS)
        b = model(g, torch.tensor([5, 5, 2], dtype=torch.long))
        assert torch.equal(a.h_attended, b.h_attended)
        assert torch.allclose(b.c, correspondence_score(a.h_attended, b.r, model.W_h, model.W_r) * g.valid)
        b.c.sum().backward()
        assert model.compat.weight.grad is None

    @pytest.mark.parametrize("branch, field", [("sgb", "appearance"), ("tgb", "motion")])
    def test_disabled_branch_ignores_its_features(self, branch, field):
        """Shuffling the features of a disabled branch leaves every output unchanged."""
        model, _, g = _model({branch: False})
        before = model(g, TOKENS)
        shuffled = dataclasses.replace(g, **{field: getattr(g, field).flip(0)})
        after = model(shuffled, TOKENS)
        assert torch.equal(before.c, after.c)
        assert torch.equal(before.h, after.h)


class TestEncodePermutation:
    """Test that the encoder does not depend on node order."""

    @staticmethod
    def _permute(g, perm):
        inv = torch.empty_like(perm)
        inv[perm] = torch.arange(perm.numel())
        return dataclasses.replace(
            g,
            appearance=g.appearance[perm],
            motion=g.motion[perm],
            geometry=g.geometry[perm],
            valid=g.valid[perm],
            spatial_idx=inv[g.spatial_idx[perm]],
            spatial_mask=g.spatial_mask[perm],
            temporal_idx=inv[g.temporal_idx[perm]],
            temporal_mask=g.temporal_mask[perm],
            union_idx=inv[g.union_idx[perm]],
            union_mask=g.union_mask[perm],
        )

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_equivariant(self, seed):
        """Permuting the nodes permutes h_s and h_t the same way."""
        model, _, g = _model()
        perm = torch.as_tensor(np.random.default_rng(seed).permutation(g.num_nodes))
        h_s, h_t = model.encode(g)
        p_s, p_t = model.encode(self._permute(g, perm))
        assert torch.allclose(p_s, h_s[perm])
        assert torch.allclose(p_t, h_t[perm])

    def test_scores_follow_nodes(self):
        """The full forward pass is permutation-equivariant as well."""
        model, _, g = _model()
        perm = torch.as_tensor(np.random.default_rng(5).permutation(g.num_nodes))
        assert torch.allclose(model(self._permute(g, perm), TOKENS).c, model(g, TOKENS).c[perm])

    def test_without_self_attention(self):
        """With sa off the decoder passes the encoder output through."""
        model, _, g = _model({"sa": False})
        out = model(g, TOKENS)
        assert torch.equal(out.h_dec, out.h)

    @pytest.mark.parametrize("branch, attr", [("sgb", "h_s"), ("tgb", "h_t")])
    def test_disabled_branch_is_zero(self, branch, attr):
        """A disabled branch contributes zeros."""
        model, _, g = _model({branch: False})
        assert not getattr(model(g, TOKENS), attr).any()

    def test_both_branches_off_rejected(self):
        """At least one encoder branch must stay on."""
        cfg, _, _, _, vocab_size = tiny_instance(0)
        with pytest.raises(ConfigError):
            DSTGModel(dataclasses.replace(cfg.model, sgb=False, tgb=False), cfg.features, vocab_size)

    def test_unit_gamma_scale(self):
        """gamma_scale='unit' gives ĥ = γ h_dec."""
        model, _, g = _model({"gamma_scale": "unit"})
        out = model(g, TOKENS)
        assert torch.allclose(out.h_attended, out.gamma.unsqueeze(-1) * out.h_dec)

    def test_literal_gamma_not_normalized(self):
        """The literal variant squashes γ so it no longer sums to 1."""
        _, _, g = _model()
        h = torch.rand(10, 4, dtype=torch.float64)
        r = torch.rand(3, dtype=torch.float64)
        compat = torch.nn.Bilinear(4, 3, 1).double()
        gamma = cross_modal_attend(h, r, compat, g.valid, literal=True)
        assert float(gamma.sum()) > 1.0 + 1e-6

    def test_deterministic_in_eval(self):
        """Two forward passes agree exactly."""
        model, _, g = _model({"dropout": 0.3})
        assert torch.equal(model(g, TOKENS).c, model(g, TOKENS).c)

    def test_node_embedding_views(self):
        """encode() and node_embeddings() expose per-node branch outputs."""
        model, graph, g = _model()
        out = model(g, TOKENS)
        nodes = node_embeddings(out)
        assert len(nodes) == 10
        assert torch.equal(nodes[3].h_s, out.h_s[3])
        assert nodes[3].gamma == pytest.approx(float(out.gamma[3]))
        encoded = encode(graph, model)
        assert torch.allclose(encoded[3].h_t, out.h_t[3])
