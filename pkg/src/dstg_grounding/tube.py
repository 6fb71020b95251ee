"""Tube value type shared by ground truth, predictions and metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

Box = tuple[float, float, float, float]


def frame_runs(frames: list[int]) -> list[tuple[int, int]]:
    """Maximal runs of consecutive frames as half-open [start, end) intervals."""
    runs: list[tuple[int, int]] = []
    for f in sorted(set(frames)):
        if runs and runs[-1][1] == f:
            runs[-1] = (runs[-1][0], f + 1)
        else:
            runs.append((f, f + 1))
    return runs


@dataclass(slots=True)
class Tube:
    """Ordered (frame, region) pairs with one box per entry."""

    entries: list[tuple[int, int]] = field(default_factory=list)
    boxes: list[Box] = field(default_factory=list)
    score: float = 0.0
    link_reward_total: float = 0.0
    object_id: int | None = None

    def __post_init__(self):
        if len(self.entries) != len(self.boxes):
            raise ValueError("Tube entries and boxes must have the same length")
        frames = [f for f, _ in self.entries]
        if len(set(frames)) != len(frames):
            raise ValueError("Tube holds more than one region for a frame")
        order = sorted(range(len(frames)), key=lambda k: frames[k])
        self.entries = [tuple(self.entries[k]) for k in order]
        self.boxes = [tuple(self.boxes[k]) for k in order]

    @property
    def frames(self) -> list[int]:
        return [f for f, _ in self.entries]

    @property
    def region_ids(self) -> list[int]:
        return [r for _, r in self.entries]

    @property
    def segments(self) -> list[tuple[int, int]]:
        return frame_runs(self.frames)

    def box_map(self) -> dict[int, Box]:
        return {f: b for (f, _), b in zip(self.entries, self.boxes)}

    def __len__(self) -> int:
        return len(self.entries)

    def to_dict(self) -> dict[str, Any]:
        data = {
            "entries": [[f, r] for f, r in self.entries],
            "boxes": [list(b) for b in self.boxes],
            "score": self.score,
            "link_reward_total": self.link_reward_total,
        }
        if self.object_id is not None:
            data["object_id"] = self.object_id
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Tube":
        return cls(
            entries=[(int(f), int(r)) for f, r in data["entries"]],
            boxes=[tuple(float(v) for v in b) for b in data["boxes"]],
            score=float(data.get("score", 0.0)),
            link_reward_total=float(data.get("link_reward_total", 0.0)),
            object_id=data.get("object_id"),
        )
