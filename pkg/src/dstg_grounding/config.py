"""Configuration dataclasses, JSON loading and hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .errors import ConfigError

CASE_KINDS = (
    "single_target_single_segment",
    "single_target_discontinuous",
    "multi_target",
)


@dataclass(slots=True)
class GeneratorConfig:
    num_frames: int = 24
    num_objects: int = 4
    width: int = 256
    height: int = 256
    fps: float = 6.0
    case_weights: dict[str, float] = field(
        default_factory=lambda: {kind: 1.0 for kind in CASE_KINDS}
    )
    # None means "sample from case_weights"
    case_kind: str | None = None
    target_action: str | None = None
    jitter_per_box: int = 1
    jitter_frac: float = 0.15
    background_per_frame: int = 2
    occlusion_gap_min: int = 3
    occlusion_gap_max: int = 8
    max_per_category: int = 4
    node_budget: int = 256
    secondary_expression_prob: float = 0.25

    def regions_per_video(self) -> int:
        """Upper bound on the flattened region count of one video."""
        per_frame = self.num_objects * (1 + self.jitter_per_box) + self.background_per_frame
        return self.num_frames * per_frame

    def validate(self) -> None:
        if not 16 <= self.num_frames <= 64:
            raise ConfigError("num_frames must be in [16, 64]")
        if not 2 <= self.num_objects <= 8:
            raise ConfigError("num_objects must be in [2, 8]")
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("width and height must be > 0")
        if self.fps <= 0:
            raise ConfigError("fps must be > 0")
        unknown = set(self.case_weights) - set(CASE_KINDS)
        if unknown:
            raise ConfigError(f"Unknown case kinds in case_weights: {sorted(unknown)}")
        if any(w < 0 for w in self.case_weights.values()) or sum(self.case_weights.values()) <= 0:
            raise ConfigError("case_weights must be non-negative with a positive sum")
        if self.case_kind is not None and self.case_kind not in CASE_KINDS:
            raise ConfigError(f"Unknown case_kind: {self.case_kind}")
        if self.jitter_per_box < 0 or self.background_per_frame < 0:
            raise ConfigError("jitter_per_box and background_per_frame must be >= 0")
        if not 0 <= self.jitter_frac < 0.5:
            raise ConfigError("jitter_frac must be in [0, 0.5)")
        if not 1 <= self.occlusion_gap_min <= self.occlusion_gap_max:
            raise ConfigError("occlusion gap bounds must satisfy 1 <= min <= max")
        if self.max_per_category < 1:
            raise ConfigError("max_per_category must be >= 1")
        if not 0 <= self.secondary_expression_prob <= 1:
            raise ConfigError("secondary_expression_prob must be in [0, 1]")
        if self.case_kind == "multi_target" and self.num_objects < 3:
            raise ConfigError("multi_target cases need >= 3 objects (two targets and a distractor)")
        if self.regions_per_video() > self.node_budget:
            raise ConfigError(
                f"{self.regions_per_video()} regions per video exceed the node budget "
                f"{self.node_budget}"
            )


@dataclass(slots=True)
class FeatureConfig:
    d_a: int = 32
    d_m: int = 16
    d_p: int = 8
    noise_sigma: float = 0.05
    motion_window: int = 7
    projection_seed: int = 0

    def validate(self) -> None:
        for name in ("d_a", "d_m", "d_p"):
            if getattr(self, name) < 4:
                raise ConfigError(f"{name} must be >= 4")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.motion_window < 2:
            raise ConfigError("motion_window must be >= 2")


@dataclass(slots=True)
class GraphConfig:
    node_budget: int = 256
    k_spatial: int = 4
    k_temporal: int = 4
    temporal_window: int = 2
    temporal_affinity: str = "iou"

    def validate(self) -> None:
        if self.node_budget < 1:
            raise ConfigError("node_budget must be >= 1")
        if self.k_spatial < 1 or self.k_temporal < 1:
            raise ConfigError("k_spatial and k_temporal must be >= 1")
        if self.temporal_window < 1:
            raise ConfigError("temporal_window must be >= 1")
        if self.temporal_affinity not in ("iou", "feature"):
            raise ConfigError("temporal_affinity must be 'iou' or 'feature'")


@dataclass(slots=True)
class ModelConfig:
    d_h: int = 32
    d_c: int = 32
    d_r: int = 64
    word_dim: int = 32
    num_layers: int = 2
    leaky_slope: float = 0.2
    dropout: float = 0.1
    max_tokens: int = 22
    sentence_pooling: str = "final"
    gamma_scale: str = "node_count"
    literal_gamma: bool = False
    # Module switches, one per ablation column.
    sgb: bool = True
    tgb: bool = True
    scl: bool = True
    tcl: bool = True
    sa: bool = True
    ca: bool = True

    def validate(self) -> None:
        if self.d_r % 2:
            raise ConfigError("d_r must be even (forward and backward halves)")
        if min(self.d_h, self.d_c, self.d_r, self.word_dim) < 1:
            raise ConfigError("model dimensions must be >= 1")
        if self.num_layers < 1:
            raise ConfigError("num_layers must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ConfigError("dropout must be in [0, 1)")
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be >= 1")
        if self.sentence_pooling not in ("final", "mean"):
            raise ConfigError("sentence_pooling must be 'final' or 'mean'")
        if self.gamma_scale not in ("unit", "node_count"):
            raise ConfigError("gamma_scale must be 'unit' or 'node_count'")
        if not (self.sgb or self.tgb):
            raise ConfigError("at least one of sgb/tgb must be enabled")


@dataclass(slots=True)
class TrainConfig:
    lambda_: float = 0.2
    negative_ratio: int = 5
    max_positives: int = 8
    optimizer: str = "adam"
    learning_rate: float = 0.005
    weight_decay: float = 0.0
    steps: int = 2400
    seed: int = 0
    dtype: str = "float64"

    def validate(self) -> None:
        if self.lambda_ < 0:
            raise ConfigError("lambda must be >= 0")
        if self.negative_ratio < 0:
            raise ConfigError("negative_ratio must be >= 0")
        if self.max_positives < 1:
            raise ConfigError("max_positives must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError("optimizer must be 'adam' or 'sgd'")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be 'float32' or 'float64'")


@dataclass(slots=True)
class GroundingConfig:
    theta_keep: float = 0.5
    min_segment_len: int = 2
    num_seeds: int = 5
    nms_threshold: float = 0.4
    max_link_distance: float = 1.0

    def validate(self) -> None:
        if not 0 <= self.theta_keep <= 1:
            raise ConfigError("theta_keep must be in [0, 1]")
        if self.min_segment_len < 1:
            raise ConfigError("min_segment_len must be >= 1")
        if self.num_seeds < 1:
            raise ConfigError("num_seeds must be >= 1")
        if not 0 <= self.nms_threshold <= 1:
            raise ConfigError("nms_threshold must be in [0, 1]")
        if self.max_link_distance < 0:
            raise ConfigError("max_link_distance must be >= 0")


@dataclass(slots=True)
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    grounding: GroundingConfig = field(default_factory=GroundingConfig)

    def validate(self) -> None:
        self.train.validate()
        self.model.validate()
        self.graph.validate()
        self.features.validate()
        self.grounding.validate()

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        sections = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(sections)
        if unknown:
            raise ConfigError(f"Unknown config sections: {sorted(unknown)}")
        kwargs = {}
        for name, f in sections.items():
            section_cls = f.default_factory().__class__
            kwargs[name] = _build(section_cls, data.get(name, {}))
        return cls(**kwargs)


def _build(cls, values: dict[str, Any]):
    """Instantiate a config dataclass, rejecting unknown keys."""
    if not isinstance(values, dict):
        raise ConfigError(f"{cls.__name__} section must be a JSON object")
    known = {f.name for f in fields(cls)}
    # "lambda" is accepted as an alias of lambda_
    values = dict(values)
    if "lambda" in values and cls is TrainConfig:
        values["lambda_"] = values.pop("lambda")
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"Unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**values)


def load_generator_config(path: Path | None) -> GeneratorConfig:
    """Read a GeneratorConfig from a JSON file (defaults when path is None)."""
    if path is None:
        cfg = GeneratorConfig()
    else:
        cfg = _build(GeneratorConfig, _read_json(path))
    cfg.validate()
    return cfg


def load_experiment_config(path: Path | None) -> ExperimentConfig:
    """Read an ExperimentConfig from a JSON file (defaults when path is None)."""
    cfg = ExperimentConfig() if path is None else ExperimentConfig.from_dict(_read_json(path))
    cfg.validate()
    return cfg


def _read_json(path: Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a JSON object")
    return data


def canonical_json(obj: Any) -> str:
    """Stable JSON text used for hashing and reproducible files."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg) -> str:
    """SHA-256 over the canonical JSON of a config dataclass."""
    return hashlib.sha256(canonical_json(asdict(cfg)).encode("utf-8")).hexdigest()
