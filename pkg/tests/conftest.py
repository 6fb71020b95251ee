"""Shared test fixtures and configuration."""

import json

import numpy as np
import pytest

from dstg_grounding.config import (
    ExperimentConfig,
    FeatureConfig,
    GeneratorConfig,
    GraphConfig,
    GroundingConfig,
    ModelConfig,
    TrainConfig,
)
from dstg_grounding.dataset import save_dataset
from dstg_grounding.manifest import make_manifest
from dstg_grounding.synthdata import generate_video
from dstg_grounding.tube import Tube


@pytest.fixture(autouse=True)
def pinned_timestamps(monkeypatch):
    """Pin manifest timestamps so written files are comparable byte for byte."""
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")


@pytest.fixture
def gen_config():
    """Small generator config: 16 frames, 3 objects (128 regions at most)."""
    return GeneratorConfig(num_frames=16, num_objects=3)


def make_sample(kind: str, seed: int, num_objects: int = 3, num_frames: int = 16, **overrides):
    cfg = GeneratorConfig(num_frames=num_frames, num_objects=num_objects, case_kind=kind, **overrides)
    return generate_video(cfg, seed, video_id=f"{kind[:6]}-{seed}")


@pytest.fixture
def easy_sample():
    """A single-target, single-segment video."""
    return make_sample("single_target_single_segment", seed=7)


@pytest.fixture
def discontinuous_sample():
    """A single-target video whose target acts in two separated clips."""
    return make_sample("single_target_discontinuous", seed=11)


@pytest.fixture
def multi_sample():
    """A video with several look-alike targets."""
    return make_sample("multi_target", seed=5, num_objects=4)


@pytest.fixture
def small_dataset(gen_config):
    """Six generated videos with mixed case kinds."""
    return [generate_video(gen_config, 100 + k, video_id=f"vid-{k:05d}") for k in range(6)]


@pytest.fixture
def dataset_file(tmp_path, small_dataset, gen_config):
    """small_dataset written to a JSON-lines file."""
    path = tmp_path / "data.jsonl"
    save_dataset(path, small_dataset, make_manifest("gen", gen_config, seed=100))
    return path


@pytest.fixture
def tiny_config():
    """Experiment config with small dimensions and a short training run."""
    return ExperimentConfig(
        train=TrainConfig(steps=6, learning_rate=0.05, seed=3),
        model=ModelConfig(d_h=8, d_c=8, d_r=8, word_dim=8, dropout=0.0),
        graph=GraphConfig(node_budget=128),
        features=FeatureConfig(d_a=8, d_m=8, d_p=4),
        grounding=GroundingConfig(),
    )


@pytest.fixture
def tiny_config_file(tmp_path, tiny_config):
    """tiny_config as a JSON config file."""
    path = tmp_path / "config.json"
    path.write_text(json.dumps(tiny_config.to_dict()), encoding="utf-8")
    return path


def box_tube(frames, box=(0.0, 0.0, 10.0, 10.0), score=0.0, first_region=0) -> Tube:
    """Tube holding the same box on every given frame."""
    frames = list(frames)
    return Tube(
        entries=[(f, first_region + k) for k, f in enumerate(frames)],
        boxes=[box] * len(frames),
        score=score,
    )


def random_tube(rng: np.random.Generator, max_frames: int = 12, canvas: float = 40.0) -> Tube:
    """Tube over a random frame subset with random boxes."""
    frames = sorted(int(f) for f in rng.choice(max_frames, size=int(rng.integers(0, max_frames + 1)), replace=False))
    boxes = []
    for _ in frames:
        x0, y0 = rng.uniform(0, canvas, size=2)
        w, h = rng.uniform(1, canvas / 2, size=2)
        boxes.append((float(x0), float(y0), float(x0 + w), float(y0 + h)))
    return Tube(entries=[(f, k) for k, f in enumerate(frames)], boxes=boxes, score=float(rng.random()))
