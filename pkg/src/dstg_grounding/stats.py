"""Dataset statistics and reporting."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .config import CASE_KINDS
from .synthdata import VideoSample


@dataclass(slots=True)
class DatasetStats:
    num_videos: int = 0
    num_expressions: int = 0
    # primary (first) expression of each video
    case_kinds: dict[str, int] = field(default_factory=dict)
    regions_per_frame: tuple[int, float, int] = (0, 0.0, 0)
    expression_length: tuple[int, float, int] = (0, 0.0, 0)
    categories: dict[str, int] = field(default_factory=dict)
    region_sources: dict[str, int] = field(default_factory=dict)
    target_frames: float = 0.0


def _min_mean_max(values: list[int]) -> tuple[int, float, int]:
    if not values:
        return (0, 0.0, 0)
    return (min(values), sum(values) / len(values), max(values))


def dataset_stats(samples: list[VideoSample]) -> DatasetStats:
    kinds = Counter({kind: 0 for kind in CASE_KINDS})
    categories: Counter[str] = Counter()
    sources: Counter[str] = Counter()
    per_frame: list[int] = []
    lengths: list[int] = []
    target_frames: list[int] = []
    num_expressions = 0

    for sample in samples:
        if sample.expressions:
            kinds[sample.expressions[0].case_kind] += 1
        num_expressions += len(sample.expressions)
        for case in sample.expressions:
            lengths.append(len(case.expression))
            target_frames.append(len({f for t in case.target_tubes for f in t.frames}))
        categories.update(o.category for o in sample.objects)
        for frame in sample.regions:
            per_frame.append(len(frame))
            sources.update(r.source for r in frame)

    return DatasetStats(
        num_videos=len(samples),
        num_expressions=num_expressions,
        case_kinds=dict(kinds),
        regions_per_frame=_min_mean_max(per_frame),
        expression_length=_min_mean_max(lengths),
        categories=dict(sorted(categories.items(), key=lambda kv: (-kv[1], kv[0]))),
        region_sources=dict(sorted(sources.items(), key=lambda kv: (-kv[1], kv[0]))),
        target_frames=sum(target_frames) / len(target_frames) if target_frames else 0.0,
    )


def show_stats(samples: list[VideoSample]):
    """
    Print dataset statistics in a formatted box.

    Includes:
    - Videos and referring expressions
    - Case-kind frequencies (primary expression per video)
    - Regions per frame and expression length (min, mean, max)
    - Object categories and region sources
    """
    if not samples:
        print("Dataset is empty. No videos generated yet.")
        print("\nStart by generating a dataset:")
        print("  uv run dstg gen --out data.jsonl --num-videos 100")
        return

    s = dataset_stats(samples)

    print("\n" + "=" * 60)
    print("SYNTHETIC GROUNDING DATASET STATISTICS".center(60))
    print("=" * 60)

    print(f"\nVideos:")
    print(f"  Total:                 {s.num_videos:,}")
    print(f"  Expressions:           {s.num_expressions:,}")
    extra = s.num_expressions - s.num_videos
    if extra:
        print(f"  Secondary expressions: {extra:,}")

    print(f"\nCase Kinds:")
    for kind, count in s.case_kinds.items():
        print(f"  {kind:30s} {count:,} ({count / s.num_videos * 100:.1f}%)")

    lo, mean, hi = s.regions_per_frame
    print(f"\nRegions per Frame:")
    print(f"  Min:                   {lo}")
    print(f"  Max:                   {hi}")
    print(f"  Average:               {mean:.1f}")

    lo, mean, hi = s.expression_length
    print(f"\nExpression Length (tokens):")
    print(f"  Min:                   {lo}")
    print(f"  Max:                   {hi}")
    print(f"  Average:               {mean:.1f}")
    print(f"  Target frames (avg):   {s.target_frames:.1f}")

    if s.categories:
        print(f"\nObjects by Category:")
        for category, count in s.categories.items():
            print(f"  {category:30s} {count:,}")

    if s.region_sources:
        print(f"\nRegions by Source:")
        for source, count in s.region_sources.items():
            print(f"  {source:30s} {count:,}")

    print("\n" + "=" * 60)
