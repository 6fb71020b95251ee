"""Training loop, checkpoints and the finite-difference gradient check."""

from __future__ import annotations

import io
import json
import pickle
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np
import torch
from tqdm import tqdm

from .config import (
    ExperimentConfig,
    FeatureConfig,
    GraphConfig,
    ModelConfig,
    TrainConfig,
)
from .dstg_model import DSTGModel, GraphTensors, graph_tensors
from .errors import DatasetError, DivergenceError
from .featurize import RegionFeatures, featurize_dataset
from .langenc import Vocabulary, build_vocab
from .manifest import RunManifest
from .objectives import TrainingPair, match_labels, sample_pairs, total_loss
from .stgraph import DualGraph, build_dual_graph
from .synthdata import VideoSample

CKPT_FORMAT = "ckpt/1"


@dataclass(slots=True)
class Checkpoint:
    state: dict[str, torch.Tensor]
    config: ExperimentConfig
    vocab: Vocabulary
    step: int = 0
    manifest: RunManifest | None = None
    rng_state: torch.Tensor = field(default_factory=lambda: torch.zeros(0, dtype=torch.uint8))

    def build_model(self) -> DSTGModel:
        model = DSTGModel(self.config.model, self.config.features, len(self.vocab))
        model = model.to(getattr(torch, self.config.train.dtype))
        model.load_state_dict(self.state)
        return model

    def to_payload(self) -> dict[str, Any]:
        return {
            "format": CKPT_FORMAT,
            "state": {name: self.state[name].detach().cpu() for name in sorted(self.state)},
            "config": self.config.to_dict(),
            "vocab": self.vocab.to_dict(),
            "step": self.step,
            "manifest": self.manifest.to_dict() if self.manifest else None,
            "rng": self.rng_state,
        }


def save_checkpoint(path: Path, ckpt: Checkpoint) -> Path:
    """
    torch.save the checkpoint payload and write a `<path>.vocab.json` sidecar.

    The archive is built in memory so its bytes do not depend on the file name.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.BytesIO()
    torch.save(ckpt.to_payload(), buffer)
    path.write_bytes(buffer.getvalue())
    ckpt.vocab.save(path.with_name(path.name + ".vocab.json"))
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    try:
        payload = torch.load(io.BytesIO(path.read_bytes()), map_location="cpu", weights_only=True)
    except (RuntimeError, pickle.UnpicklingError, EOFError, ValueError) as e:
        raise DatasetError(f"{path}: not a checkpoint file ({e})")
    if not isinstance(payload, dict) or payload.get("format") != CKPT_FORMAT:
        found = payload.get("format") if isinstance(payload, dict) else type(payload).__name__
        raise DatasetError(f"{path}: unsupported checkpoint format {found!r}")
    try:
        return Checkpoint(
            state=dict(payload["state"]),
            config=ExperimentConfig.from_dict(payload["config"]),
            vocab=Vocabulary.from_dict(payload["vocab"]),
            step=int(payload["step"]),
            manifest=RunManifest.from_dict(payload["manifest"]) if payload.get("manifest") else None,
            rng_state=payload["rng"],
        )
    except KeyError as e:
        raise DatasetError(f"{path}: checkpoint is missing {e}")


@dataclass(slots=True)
class PreparedCase:
    video_idx: int
    expression_idx: int
    tokens: torch.Tensor
    labels: torch.Tensor


@dataclass(slots=True)
class TrainResult:
    model: DSTGModel
    checkpoint: Checkpoint
    history: list[dict] = field(default_factory=list)


def prepare_graphs(
    samples: list[VideoSample],
    cfg: ExperimentConfig,
    features: dict[str, RegionFeatures] | None = None,
    verbose: bool = True,
) -> list[DualGraph]:
    if features is None:
        features = featurize_dataset(samples, cfg.features, verbose=verbose)
    return [build_dual_graph(s, features[s.video_id], cfg.graph) for s in samples]


def make_optimizer(model: DSTGModel, tc: TrainConfig) -> torch.optim.Optimizer:
    if tc.optimizer == "sgd":
        return torch.optim.SGD(model.parameters(), lr=tc.learning_rate, weight_decay=tc.weight_decay)
    return torch.optim.Adam(model.parameters(), lr=tc.learning_rate, weight_decay=tc.weight_decay)


def train(
    samples: list[VideoSample],
    cfg: ExperimentConfig,
    log_path: Path | None = None,
    graphs: list[DualGraph] | None = None,
    manifest: RunManifest | None = None,
    verbose: bool = True,
) -> TrainResult:
    """
    Adam (or plain SGD) on the total loss, one (video, expression) case per step.

    Cases are reshuffled every epoch from (seed, epoch). Ground-truth regions
    are part of every video's proposals, so they are always trained on.

    Raises:
        DivergenceError: a step produced a non-finite loss
    """
    cfg.validate()
    if not samples:
        raise DatasetError("No training samples")
    tc = cfg.train
    dtype = getattr(torch, tc.dtype)
    torch.manual_seed(tc.seed)

    vocab = build_vocab(case.expression for s in samples for case in s.expressions)
    model = DSTGModel(cfg.model, cfg.features, len(vocab)).to(dtype)
    optimizer = make_optimizer(model, tc)

    if graphs is None:
        graphs = prepare_graphs(samples, cfg, verbose=verbose)
    tensors: list[GraphTensors] = [graph_tensors(g, dtype) for g in graphs]
    cases = []
    for v, sample in enumerate(samples):
        for e, case in enumerate(sample.expressions):
            cases.append(PreparedCase(
                video_idx=v,
                expression_idx=e,
                tokens=torch.tensor(vocab.encode(case.expression[: cfg.model.max_tokens]), dtype=torch.long),
                labels=torch.as_tensor(match_labels(sample, case, graphs[v]), dtype=dtype),
            ))

    history: list[dict] = []
    log_file = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        model.train()
        order: np.ndarray = np.array([], dtype=int)
        epoch = -1
        for step in tqdm(range(tc.steps), desc="Training", unit="step", disable=not verbose):
            pos = step % len(cases)
            if pos == 0:
                epoch += 1
                order = np.random.default_rng([tc.seed, epoch]).permutation(len(cases))
            prepared = cases[int(order[pos])]
            sample = samples[prepared.video_idx]
            graph = graphs[prepared.video_idx]
            pairs = sample_pairs(
                sample,
                sample.expressions[prepared.expression_idx],
                graph,
                tc.negative_ratio,
                [tc.seed, step],
                tc.max_positives,
            )

            optimizer.zero_grad()
            out = model(tensors[prepared.video_idx], prepared.tokens)
            breakdown = total_loss(out, prepared.labels, pairs, tc.lambda_, cfg.model.scl, cfg.model.tcl)
            if not breakdown.is_finite():
                raise DivergenceError(step, breakdown)
            breakdown.L_total.backward()
            optimizer.step()

            record = {
                "step": step,
                "epoch": epoch,
                "case": f"{sample.video_id}#{prepared.expression_idx}",
                **breakdown.as_floats(),
            }
            history.append(record)
            if log_file:
                log_file.write(json.dumps(record, sort_keys=True) + "\n")
    finally:
        if log_file:
            log_file.close()

    model.eval()
    checkpoint = Checkpoint(
        state={k: v.detach().clone() for k, v in model.state_dict().items()},
        config=cfg,
        vocab=vocab,
        step=tc.steps,
        manifest=manifest,
        rng_state=torch.get_rng_state(),
    )
    return TrainResult(model=model, checkpoint=checkpoint, history=history)


# --- gradient check ---------------------------------------------------------

def tiny_instance(seed: int = 0) -> tuple[ExperimentConfig, DualGraph, torch.Tensor, list[TrainingPair], int]:
    """
    A 2-frame, 4-regions-per-frame problem with small dimensions.

    Returns:
        (config, graph, labels, pairs, vocab_size)
    """
    rng = np.random.default_rng(seed)
    feat_cfg = FeatureConfig(d_a=4, d_m=4, d_p=4, noise_sigma=0.0)
    model_cfg = ModelConfig(d_h=4, d_c=4, d_r=4, word_dim=4, dropout=0.0, max_tokens=6)
    graph_cfg = GraphConfig(node_budget=8, k_spatial=2, k_temporal=2, temporal_window=1)
    cfg = ExperimentConfig(train=TrainConfig(dtype="float64"), model=model_cfg, graph=graph_cfg, features=feat_cfg)

    frames = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    x0 = rng.uniform(0, 60, size=8)
    y0 = rng.uniform(0, 60, size=8)
    side = rng.uniform(10, 30, size=8)
    boxes = np.stack([x0, y0, x0 + side, y0 + side], axis=1)
    geometry = np.stack([
        boxes[:, 0] / 100, boxes[:, 1] / 100, boxes[:, 2] / 100, boxes[:, 3] / 100,
        side * side / 10000,
    ], axis=1)
    features = RegionFeatures(
        video_id="gradcheck",
        region_ids=np.arange(8),
        frame_idx=frames,
        boxes=boxes,
        appearance=rng.normal(size=(8, 4)),
        motion=rng.normal(size=(8, 4)),
        geometry=geometry,
    )
    graph = build_dual_graph(None, features, graph_cfg)
    labels = torch.tensor([1, 0, 0, 0, 1, 0, 0, 0], dtype=torch.float64)
    pairs = [
        TrainingPair(anchor=0, positives=[4], negatives=[1, 2, 5]),
        TrainingPair(anchor=4, positives=[0], negatives=[6, 7, 3]),
    ]
    return cfg, graph, labels, pairs, 6


def grad_errors(
    cfg: ExperimentConfig | None = None,
    lambda_: float = 0.2,
    corrupt: Callable[[str, torch.Tensor], torch.Tensor] | None = None,
    seed: int = 0,
    entries_per_param: int = 8,
    step: float = 1e-5,
) -> dict[str, float]:
    """
    Max relative error per parameter between autograd and central differences.

    rel = |analytic − numeric| / max(|analytic|, |numeric|, 1e-6), over up to
    entries_per_param sampled entries of each parameter. `corrupt` may rewrite
    an analytic gradient by name before comparison.
    """
    tiny_cfg, graph, labels, pairs, vocab_size = tiny_instance(seed)
    if cfg is not None:
        tiny_cfg = replace(tiny_cfg, model=replace(cfg.model, dropout=0.0, d_h=4, d_c=4, d_r=4, word_dim=4))
    torch.manual_seed(seed)
    model = DSTGModel(tiny_cfg.model, tiny_cfg.features, vocab_size).to(torch.float64)
    model.eval()
    g = graph_tensors(graph, torch.float64)
    tokens = torch.tensor([2, 3, 4, 5, 3], dtype=torch.long)
    spatial, temporal = tiny_cfg.model.scl, tiny_cfg.model.tcl

    def loss_value() -> torch.Tensor:
        out = model(g, tokens)
        return total_loss(out, labels, pairs, lambda_, spatial, temporal).L_total

    model.zero_grad()
    loss_value().backward()

    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}
    for name, param in model.named_parameters():
        if param.grad is None:
            continue
        analytic = param.grad.detach().clone()
        if corrupt is not None:
            analytic = corrupt(name, analytic)
        flat = param.data.view(-1)
        count = min(entries_per_param, flat.numel())
        picks = rng.choice(flat.numel(), size=count, replace=False)
        worst = 0.0
        for k in picks:
            k = int(k)
            original = float(flat[k])
            with torch.no_grad():
                flat[k] = original + step
                plus = float(loss_value())
                flat[k] = original - step
                minus = float(loss_value())
                flat[k] = original
            numeric = (plus - minus) / (2 * step)
            a = float(analytic.view(-1)[k])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            worst = max(worst, rel)
        errors[name] = worst
    return errors


def grad_check(
    cfg: ExperimentConfig | None = None,
    lambda_: float = 0.2,
    corrupt: Callable[[str, torch.Tensor], torch.Tensor] | None = None,
    seed: int = 0,
) -> float:
    """Largest relative gradient error over all parameters of the tiny instance."""
    return max(grad_errors(cfg, lambda_, corrupt, seed).values())
