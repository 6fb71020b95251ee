"""Tests for box IoU, tube vIoU, temporal IoU and report aggregation."""

import numpy as np
import pytest

from dstg_grounding import metrics
from dstg_grounding.metrics import (
    CaseTruth,
    box_iou,
    match_and_score,
    score_case,
    temporal_iou,
    tube_viou,
)
from dstg_grounding.tube import Tube
from tests.conftest import box_tube, random_tube


def _reference_viou(pred: Tube, gt: Tube) -> float:
    """Frame-by-frame reference over every frame index."""
    p, g = pred.box_map(), gt.box_map()
    last = max([*p, *g], default=-1)
    total, union = 0.0, 0
    for f in range(last + 1):
        if f in p or f in g:
            union += 1
        if f in p and f in g:
            total += box_iou(p[f], g[f])
    return total / union if union else 0.0


def _reference_tiou(pred: Tube, gt: Tube) -> float:
    p, g = set(pred.frames), set(gt.frames)
    last = max([*p, *g], default=-1)
    inter = sum(1 for f in range(last + 1) if f in p and f in g)
    union = sum(1 for f in range(last + 1) if f in p or f in g)
    return inter / union if union else 0.0


class TestBoxIoU:
    """Test the box IoU primitive."""

    def test_identical_boxes(self):
        """Identical boxes have IoU 1."""
        assert box_iou((1, 2, 5, 7), (1, 2, 5, 7)) == 1.0

    def test_disjoint_boxes(self):
        """Disjoint boxes have IoU 0."""
        assert box_iou((0, 0, 1, 1), (2, 2, 3, 3)) == 0.0

    def test_touching_boxes(self):
        """Boxes sharing only an edge have IoU 0."""
        assert box_iou((0, 0, 1, 1), (1, 0, 2, 1)) == 0.0

    def test_quarter_overlap(self):
        """(0,0,2,2) vs (1,1,3,3) is 1/7."""
        assert box_iou((0, 0, 2, 2), (1, 1, 3, 3)) == pytest.approx(1 / 7, abs=1e-12)


class TestTubeViou:
    """Test tube vIoU with union/intersection frame sets."""

    def test_identical_tubes(self):
        """A tube against itself scores 1."""
        tube = box_tube(range(5))
        assert tube_viou(tube, tube) == 1.0

    def test_temporally_disjoint(self):
        """Tubes without a common frame score 0."""
        assert tube_viou(box_tube(range(0, 5)), box_tube(range(5, 10))) == 0.0

    def test_partial_temporal_overlap(self):
        """Frames 0-9 vs 5-14 with perfect boxes on the overlap is 5/15."""
        assert tube_viou(box_tube(range(0, 10)), box_tube(range(5, 15))) == pytest.approx(1 / 3)

    def test_both_empty(self):
        """Two empty tubes score 0."""
        assert tube_viou(Tube(), Tube()) == 0.0

    def test_matches_reference(self):
        """Exact agreement with the frame-by-frame reference on 500 random pairs."""
        rng = np.random.default_rng(0)
        for _ in range(500):
            pred, gt = random_tube(rng), random_tube(rng)
            assert tube_viou(pred, gt) == _reference_viou(pred, gt)
            assert temporal_iou(pred.segments, gt.segments) == _reference_tiou(pred, gt)

    def test_viou_bounded_by_tiou(self):
        """vIoU never exceeds the temporal IoU of the same pair."""
        rng = np.random.default_rng(1)
        for _ in range(200):
            pred, gt = random_tube(rng), random_tube(rng)
            assert 0.0 <= tube_viou(pred, gt) <= temporal_iou(pred.segments, gt.segments) + 1e-12


class TestTemporalIoU:
    """Test temporal IoU over half-open segments."""

    def test_identical(self):
        """Identical segment sets score 1."""
        assert temporal_iou([(0, 5), (8, 10)], [(0, 5), (8, 10)]) == 1.0

    def test_shifted_segment(self):
        """[10,20) vs [15,25) is 5/15."""
        assert temporal_iou([(10, 20)], [(15, 25)]) == pytest.approx(1 / 3)

    def test_gap_in_ground_truth(self):
        """gt {[0,5), [10,15)} vs pred [0,15) is 10/15."""
        assert temporal_iou([(0, 15)], [(0, 5), (10, 15)]) == pytest.approx(2 / 3)

    def test_empty(self):
        """No frames on either side gives 0."""
        assert temporal_iou([], []) == 0.0


class TestMatchAndScore:
    """Test per-case matching and report aggregation."""

    def test_assignment_maximizes_viou(self, monkeypatch):
        """Cross vIoU [[0.8, 0.1], [0.2, 0.6]] matches 0→0, 1→1 for a case vIoU of 0.7."""
        preds = [box_tube([0], first_region=0), box_tube([0], first_region=1)]
        gts = [box_tube([0], first_region=2), box_tube([0], first_region=3)]
        table = {(0, 2): 0.8, (0, 3): 0.1, (1, 2): 0.2, (1, 3): 0.6}
        monkeypatch.setattr(
            metrics, "tube_viou",
            lambda p, g: table[(p.region_ids[0], g.region_ids[0])],
        )
        viou, _, viou_at, _ = score_case(preds, gts)
        assert viou == pytest.approx(0.7)
        assert viou_at["0.5"] == pytest.approx(1.0)
        assert viou_at["0.7"] == pytest.approx(0.5)

    def test_unmatched_ground_truth_scores_zero(self):
        """One perfect prediction for two GT tubes scores 1/2."""
        gts = [box_tube(range(4)), box_tube(range(4), box=(50, 50, 60, 60))]
        viou, tiou, _, _ = score_case([box_tube(range(4))], gts)
        assert viou == pytest.approx(0.5)
        assert tiou == pytest.approx(0.5)

    def test_surplus_predictions_score_zero(self):
        """An extra prediction halves a perfect single-target case."""
        gt = box_tube(range(4))
        viou, _, _, _ = score_case([gt, box_tube(range(10, 12))], [gt])
        assert viou == pytest.approx(0.5)

    def test_perfect_predictions(self):
        """Predictions equal to the ground truth give 1 everywhere."""
        truths = [
            CaseTruth("v0", 0, "single_target_single_segment", [box_tube(range(3))]),
            CaseTruth("v1", 0, "multi_target", [box_tube(range(3)), box_tube(range(3), box=(20, 20, 30, 30))]),
        ]
        report = match_and_score({t.key: t.tubes for t in truths}, truths)
        assert report.m_viou == pytest.approx(1.0)
        assert report.m_tiou == pytest.approx(1.0)
        assert all(v == pytest.approx(1.0) for v in report.viou_at.values())

    def test_empty_predictions(self):
        """Empty tube lists score 0 without being flagged as missing."""
        truths = [CaseTruth("v0", 0, "single_target_single_segment", [box_tube(range(3))])]
        report = match_and_score({("v0", 0): []}, truths)
        assert report.m_viou == 0.0
        assert all(v == 0.0 for v in report.viou_at.values())
        assert report.missing == []

    def test_missing_predictions_flagged(self):
        """A case without any prediction entry scores 0 and is listed."""
        truths = [CaseTruth("v0", 1, "single_target_single_segment", [box_tube(range(3))])]
        report = match_and_score({}, truths)
        assert report.missing == ["v0#1"]
        assert report.rows[0].missing

    def test_split_filters_case_kinds(self):
        """Each split keeps only its case kind."""
        truths = [
            CaseTruth("a", 0, "single_target_single_segment", [box_tube(range(3))]),
            CaseTruth("b", 0, "multi_target", [box_tube(range(3))]),
            CaseTruth("c", 0, "single_target_discontinuous", [box_tube([0, 1, 5, 6])]),
        ]
        for split, vid in (("vg_easy", "a"), ("sg_hard", "b"), ("tg_hard", "c")):
            report = match_and_score({}, truths, split)
            assert [r.video_id for r in report.rows] == [vid]
        assert match_and_score({}, truths, "all").num_cases == 3

    def test_unknown_split(self):
        """An unknown split name is rejected."""
        with pytest.raises(ValueError):
            match_and_score({}, [], "hard")

    def test_thresholds_monotone(self):
        """vIoU@0.3 >= vIoU@0.5 >= vIoU@0.7 on random reports."""
        rng = np.random.default_rng(2)
        truths, results = [], {}
        for k in range(40):
            gt = random_tube(rng, max_frames=8)
            truths.append(CaseTruth(f"v{k}", 0, "single_target_single_segment", [gt]))
            results[(f"v{k}", 0)] = [random_tube(rng, max_frames=8)]
        report = match_and_score(results, truths)
        at = report.viou_at
        assert at["0.3"] >= at["0.5"] >= at["0.7"]
        assert all(0.0 <= v <= 1.0 for v in at.values())

    def test_report_schema(self):
        """Serialized reports carry the eval/1 schema tag."""
        assert match_and_score({}, []).to_dict()["schema"] == "eval/1"
