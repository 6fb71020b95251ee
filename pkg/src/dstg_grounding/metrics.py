"""Evaluation suite: box IoU, tube vIoU, temporal IoU and report aggregation.

vIoU follows the F_U / F_I definition: per-frame box IoUs summed over the
frames both tubes cover, divided by the number of frames either tube covers.
Frames are integers and segments are half-open [start, end) intervals.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .tube import Box, Tube

THRESHOLDS = (0.3, 0.5, 0.7)
SPLITS = ("all", "vg_easy", "sg_hard", "tg_hard")
REPORT_SCHEMA = "eval/1"

# Which case kinds each split keeps.
SPLIT_KINDS = {
    "all": None,
    "vg_easy": {"single_target_single_segment"},
    "sg_hard": {"multi_target"},
    "tg_hard": {"single_target_discontinuous"},
}


def box_iou(a: Box, b: Box) -> float:
    """Intersection over union of two (x0, y0, x1, y1) boxes."""
    ix0, iy0 = max(a[0], b[0]), max(a[1], b[1])
    ix1, iy1 = min(a[2], b[2]), min(a[3], b[3])
    iw, ih = ix1 - ix0, iy1 - iy0
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    if union <= 0:
        return 0.0
    return inter / union


def tube_viou(pred: Tube, gt: Tube) -> float:
    """Spatio-temporal IoU of two tubes (0 when both are empty)."""
    pred_boxes = pred.box_map()
    gt_boxes = gt.box_map()
    union = set(pred_boxes) | set(gt_boxes)
    if not union:
        return 0.0
    total = 0.0
    for f in sorted(set(pred_boxes) & set(gt_boxes)):
        total += box_iou(pred_boxes[f], gt_boxes[f])
    return total / len(union)


def _frame_set(segments: Iterable[tuple[int, int]]) -> set[int]:
    frames: set[int] = set()
    for start, end in segments:
        frames.update(range(int(start), int(end)))
    return frames


def temporal_iou(pred_segments: Sequence[tuple[int, int]], gt_segments: Sequence[tuple[int, int]]) -> float:
    """IoU of the frame sets covered by two lists of half-open segments."""
    pred_frames = _frame_set(pred_segments)
    gt_frames = _frame_set(gt_segments)
    union = pred_frames | gt_frames
    if not union:
        return 0.0
    return len(pred_frames & gt_frames) / len(union)


@dataclass(slots=True)
class CaseTruth:
    video_id: str
    expression_idx: int
    case_kind: str
    tubes: list[Tube]

    @property
    def key(self) -> tuple[str, int]:
        return (self.video_id, self.expression_idx)


@dataclass(slots=True)
class CaseRow:
    video_id: str
    expression_idx: int
    case_kind: str
    num_gt: int
    num_pred: int
    viou: float
    tiou: float
    viou_at: dict[str, float]
    tiou_at: dict[str, float]
    missing: bool = False


@dataclass(slots=True)
class EvalReport:
    split: str
    num_cases: int
    m_viou: float
    viou_at: dict[str, float]
    m_tiou: float
    tiou_at: dict[str, float]
    rows: list[CaseRow] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["schema"] = REPORT_SCHEMA
        return data


def _threshold_key(r: float) -> str:
    return f"{r:.1f}"


def score_case(pred_tubes: list[Tube], gt_tubes: list[Tube]) -> tuple[float, float, dict[str, float], dict[str, float]]:
    """
    Score one (video, expression) case.

    Predictions are matched one-to-one to ground-truth tubes by maximum total
    vIoU. Every matched pair contributes its vIoU and tIoU; unmatched tubes on
    either side contribute 0, so the sums are divided by the larger count.

    Returns:
        (viou, tiou, viou_at, tiou_at) with the @R values as proportions of pairs
    """
    denom = max(len(pred_tubes), len(gt_tubes))
    if denom == 0 or not pred_tubes or not gt_tubes:
        zeros = {_threshold_key(r): 0.0 for r in THRESHOLDS}
        return 0.0, 0.0, dict(zeros), dict(zeros)

    viou = np.array([[tube_viou(p, g) for g in gt_tubes] for p in pred_tubes])
    rows, cols = linear_sum_assignment(-viou)

    matched_viou = [float(viou[i, j]) for i, j in zip(rows, cols)]
    matched_tiou = [
        temporal_iou(pred_tubes[i].segments, gt_tubes[j].segments) for i, j in zip(rows, cols)
    ]
    viou_at = {_threshold_key(r): sum(v >= r for v in matched_viou) / denom for r in THRESHOLDS}
    tiou_at = {_threshold_key(r): sum(t >= r for t in matched_tiou) / denom for r in THRESHOLDS}
    return sum(matched_viou) / denom, sum(matched_tiou) / denom, viou_at, tiou_at


def in_split(case_kind: str, split: str) -> bool:
    if split not in SPLIT_KINDS:
        raise ValueError(f"Unknown split: {split}")
    kinds = SPLIT_KINDS[split]
    return kinds is None or case_kind in kinds


def match_and_score(
    results: dict[tuple[str, int], list[Tube]],
    ground_truths: list[CaseTruth],
    split: str = "all",
) -> EvalReport:
    """
    Aggregate per-case scores into an EvalReport for one split.

    Args:
        results: predicted tubes keyed by (video_id, expression_idx)
        ground_truths: one CaseTruth per referring case
        split: one of all, vg_easy, sg_hard, tg_hard

    Cases without a prediction entry score 0 and are listed in report.missing.
    """
    rows: list[CaseRow] = []
    missing: list[str] = []
    for truth in ground_truths:
        if not in_split(truth.case_kind, split):
            continue
        preds = results.get(truth.key)
        is_missing = preds is None
        if is_missing:
            missing.append(f"{truth.video_id}#{truth.expression_idx}")
            preds = []
        viou, tiou, viou_at, tiou_at = score_case(preds, truth.tubes)
        rows.append(CaseRow(
            video_id=truth.video_id,
            expression_idx=truth.expression_idx,
            case_kind=truth.case_kind,
            num_gt=len(truth.tubes),
            num_pred=len(preds),
            viou=viou,
            tiou=tiou,
            viou_at=viou_at,
            tiou_at=tiou_at,
            missing=is_missing,
        ))

    if not rows:
        zeros = {_threshold_key(r): 0.0 for r in THRESHOLDS}
        return EvalReport(split, 0, 0.0, dict(zeros), 0.0, dict(zeros), [], missing)

    n = len(rows)
    return EvalReport(
        split=split,
        num_cases=n,
        m_viou=sum(r.viou for r in rows) / n,
        viou_at={k: sum(r.viou_at[k] for r in rows) / n for k in rows[0].viou_at},
        m_tiou=sum(r.tiou for r in rows) / n,
        tiou_at={k: sum(r.tiou_at[k] for r in rows) / n for k in rows[0].tiou_at},
        rows=rows,
        missing=missing,
    )
