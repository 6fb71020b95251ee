"""Dataset JSON-lines persistence with the validation gate.

Layout: a header line {"schema": "gvg-synth/1", "manifest": {...}} followed by
one VideoSample object per line. Tubes are stored as sorted
[frame_idx, region_idx] lists; coordinates are absolute pixels.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable

from .config import canonical_json
from .errors import DatasetError
from .manifest import RunManifest, sha256_text
from .synthdata import (
    Appearance,
    MotionSegment,
    ReferringCase,
    Region,
    SceneObject,
    Trajectory,
    VideoSample,
    validate_sample,
)
from .tube import Tube

DATASET_SCHEMA = "gvg-synth/1"


def sample_to_dict(sample: VideoSample) -> dict[str, Any]:
    return {
        "schema": DATASET_SCHEMA,
        "video_id": sample.video_id,
        "seed": sample.seed,
        "width": sample.width,
        "height": sample.height,
        "num_frames": sample.num_frames,
        "fps": sample.fps,
        "objects": [
            {
                "object_id": o.object_id,
                "category": o.category,
                "appearance": {
                    "color": o.appearance.color,
                    "size": o.appearance.size,
                    "texture": o.appearance.texture,
                },
                "motion_program": [
                    {
                        "action": s.action,
                        "start_frame": s.start_frame,
                        "end_frame": s.end_frame,
                        "trajectory": {
                            "kind": s.trajectory.kind,
                            "origin": list(s.trajectory.origin),
                            "velocity": list(s.trajectory.velocity),
                            "amplitude": list(s.trajectory.amplitude),
                            "period": s.trajectory.period,
                            "phase": s.trajectory.phase,
                        },
                    }
                    for s in o.motion_program
                ],
            }
            for o in sample.objects
        ],
        "regions": [
            [
                {
                    "region_idx": r.region_idx,
                    "frame_idx": r.frame_idx,
                    "box": list(r.box),
                    "source": r.source,
                    "object_id": r.object_id,
                    "parent_idx": r.parent_idx,
                }
                for r in frame
            ]
            for frame in sample.regions
        ],
        "expressions": [
            {
                "expression": list(case.expression),
                "case_kind": case.case_kind,
                "action": case.action,
                "target_object_ids": list(case.target_object_ids),
                "target_tubes": [t.to_dict() for t in case.target_tubes],
                # JSON keys are strings; sorted for stable output
                "distractor_labels": {str(k): v for k, v in sorted(case.distractor_labels.items())},
            }
            for case in sample.expressions
        ],
    }


def sample_from_dict(data: dict[str, Any]) -> VideoSample:
    """Rebuild a VideoSample; raises DatasetError on a missing field or wrong schema."""
    if data.get("schema") != DATASET_SCHEMA:
        raise DatasetError(f"Unsupported sample schema: {data.get('schema')!r}")
    try:
        objects = [
            SceneObject(
                object_id=int(o["object_id"]),
                category=o["category"],
                appearance=Appearance(**o["appearance"]),
                motion_program=[
                    MotionSegment(
                        action=s["action"],
                        start_frame=int(s["start_frame"]),
                        end_frame=int(s["end_frame"]),
                        trajectory=Trajectory(
                            kind=s["trajectory"]["kind"],
                            origin=tuple(s["trajectory"]["origin"]),
                            velocity=tuple(s["trajectory"]["velocity"]),
                            amplitude=tuple(s["trajectory"]["amplitude"]),
                            period=float(s["trajectory"]["period"]),
                            phase=float(s["trajectory"]["phase"]),
                        ),
                    )
                    for s in o["motion_program"]
                ],
            )
            for o in data["objects"]
        ]
        regions = [
            [
                Region(
                    region_idx=int(r["region_idx"]),
                    frame_idx=int(r["frame_idx"]),
                    box=tuple(float(v) for v in r["box"]),
                    source=r["source"],
                    object_id=r.get("object_id"),
                    parent_idx=r.get("parent_idx"),
                )
                for r in frame
            ]
            for frame in data["regions"]
        ]
        expressions = [
            ReferringCase(
                expression=list(e["expression"]),
                case_kind=e["case_kind"],
                action=e["action"],
                target_object_ids=[int(i) for i in e["target_object_ids"]],
                target_tubes=[Tube.from_dict(t) for t in e["target_tubes"]],
                distractor_labels={int(k): v for k, v in e["distractor_labels"].items()},
            )
            for e in data["expressions"]
        ]
        return VideoSample(
            video_id=str(data["video_id"]),
            width=int(data["width"]),
            height=int(data["height"]),
            num_frames=int(data["num_frames"]),
            fps=float(data["fps"]),
            objects=objects,
            regions=regions,
            expressions=expressions,
            seed=int(data.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetError(f"Malformed sample {data.get('video_id', '?')}: {e}")


def dataset_hash(samples: Iterable[VideoSample]) -> str:
    """Content hash over the canonical sample lines (header excluded)."""
    return sha256_text("\n".join(canonical_json(sample_to_dict(s)) for s in samples))


def save_dataset(path: Path, samples: list[VideoSample], manifest: RunManifest) -> Path:
    """Write samples as JSON lines with the manifest header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest.dataset_hash = dataset_hash(samples)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(canonical_json({"schema": DATASET_SCHEMA, "manifest": manifest.to_dict()}) + "\n")
        for sample in samples:
            f.write(canonical_json(sample_to_dict(sample)) + "\n")
    return path


def load_dataset(path: Path, validate: bool = True) -> tuple[list[VideoSample], RunManifest | None]:
    """
    Read a dataset file.

    Args:
        path: JSON-lines dataset
        validate: run validate_sample on every sample and reject the file on violations

    Returns:
        (samples, manifest); manifest is None when the header line is absent

    Raises:
        FileNotFoundError: path does not exist
        DatasetError: malformed lines or invariant violations
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset not found: {path}")

    samples: list[VideoSample] = []
    manifest = None
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path}:{line_no}: not valid JSON ({e})")
            if "manifest" in data and "video_id" not in data:
                if data.get("schema") != DATASET_SCHEMA:
                    raise DatasetError(f"{path}: unsupported dataset schema {data.get('schema')!r}")
                manifest = RunManifest.from_dict(data["manifest"])
                continue
            samples.append(sample_from_dict(data))

    if not samples:
        raise DatasetError(f"{path}: dataset holds no samples")

    if validate:
        problems = []
        for sample in samples:
            problems.extend(f"{sample.video_id}: {v}" for v in validate_sample(sample))
        if problems:
            shown = "; ".join(problems[:5])
            more = f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""
            raise DatasetError(f"{path}: {len(problems)} invariant violation(s): {shown}{more}")
    return samples, manifest


def split_holdout(samples: list[VideoSample], holdout: int | None) -> tuple[list[VideoSample], list[VideoSample]]:
    """Train/eval split keeping the last `holdout` videos (default 20%) for evaluation."""
    if holdout is None:
        holdout = max(1, len(samples) // 5) if len(samples) > 1 else 0
    if holdout < 0 or holdout > len(samples):
        raise DatasetError(f"holdout {holdout} outside [0, {len(samples)}]")
    cut = len(samples) - holdout
    return samples[:cut], samples[cut:]
