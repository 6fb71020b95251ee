"""Tests for the synthetic video generator and its sample validation."""

import dataclasses
from collections import Counter

import pytest

from dstg_grounding.config import CASE_KINDS, GeneratorConfig
from dstg_grounding.dataset import sample_to_dict
from dstg_grounding.errors import ConfigError
from dstg_grounding.metrics import box_iou
from dstg_grounding.synthdata import (
    MAX_EXPRESSION_TOKENS,
    GERUNDS,
    MIN_EXPRESSION_TOKENS,
    PLURALS,
    generate_video,
    render_expression,
    validate_sample,
)
from tests.conftest import make_sample


class TestGenerateVideo:
    """Test generation determinism and structure."""

    def test_same_seed_same_sample(self, gen_config):
        """Two calls with one seed give identical samples."""
        a = generate_video(gen_config, 42)
        b = generate_video(gen_config, 42)
        assert sample_to_dict(a) == sample_to_dict(b)

    def test_different_seeds_differ(self, gen_config):
        """Different seeds give different samples."""
        a = sample_to_dict(generate_video(gen_config, 1))
        b = sample_to_dict(generate_video(gen_config, 2))
        assert a["regions"] != b["regions"]

    def test_default_video_id(self, gen_config):
        """Without an id the sample is named after its seed."""
        assert generate_video(gen_config, 9).video_id == "synth-9"

    def test_samples_are_valid(self, gen_config):
        """Fifty generated videos pass every invariant check."""
        for seed in range(50):
            sample = generate_video(gen_config, seed)
            assert validate_sample(sample) == [], seed

    def test_region_indices_contiguous(self, easy_sample):
        """Region indices are 0..n-1 and increase with the frame index."""
        flat = easy_sample.all_regions()
        assert [r.region_idx for r in flat] == list(range(len(flat)))
        frames = [r.frame_idx for r in flat]
        assert frames == sorted(frames)

    def test_region_count_within_budget(self, gen_config):
        """A video never holds more regions than the configured bound."""
        for seed in range(10):
            sample = generate_video(gen_config, seed)
            assert len(sample.all_regions()) <= gen_config.regions_per_video()

    def test_jittered_regions_overlap_parent(self, easy_sample):
        """Jittered duplicates keep IoU >= 0.5 with their ground-truth box."""
        regions = easy_sample.region_map()
        jittered = [r for r in regions.values() if r.source == "jittered"]
        assert jittered
        for r in jittered:
            parent = regions[r.parent_idx]
            assert parent.source == "ground_truth"
            assert parent.frame_idx == r.frame_idx
            assert box_iou(r.box, parent.box) >= 0.5

    def test_expression_length(self, gen_config):
        """Expressions have between 5 and 22 tokens."""
        for seed in range(30):
            for case in generate_video(gen_config, seed).expressions:
                assert MIN_EXPRESSION_TOKENS <= len(case.expression) <= MAX_EXPRESSION_TOKENS

    def test_render_names_target(self, easy_sample):
        """The sentence carries the target's attributes, noun and verb."""
        case = easy_sample.expressions[0]
        target = easy_sample.object_map()[case.target_object_ids[0]]
        for seed in range(8):
            tokens = render_expression(case, easy_sample.objects, seed)
            assert target.appearance.color in tokens
            assert target.category in tokens
            assert GERUNDS[case.action] in tokens
            assert render_expression(case, easy_sample.objects, seed) == tokens

    def test_render_plural_noun(self, multi_sample):
        """Multi-target cases use the plural noun."""
        case = multi_sample.expressions[0]
        target = multi_sample.object_map()[case.target_object_ids[0]]
        assert PLURALS[target.category] in render_expression(case, multi_sample.objects, 0)


class TestCaseKinds:
    """Test the three referring-case kinds."""

    @pytest.mark.parametrize("kind", CASE_KINDS)
    def test_forced_kind(self, kind):
        """case_kind forces the primary expression's kind."""
        sample = make_sample(kind, seed=3)
        assert sample.expressions[0].case_kind == kind

    def test_every_kind_well_represented(self):
        """Over 300 default videos each case kind leads at least 20% of them."""
        cfg = GeneratorConfig()
        counts = Counter(generate_video(cfg, seed).expressions[0].case_kind for seed in range(300))
        assert set(counts) == set(CASE_KINDS)
        assert min(counts.values()) >= 60

    def test_single_segment_tube(self, easy_sample):
        """The target of an easy case acts in one contiguous run."""
        case = easy_sample.expressions[0]
        assert len(case.target_tubes) == 1
        assert len(case.target_tubes[0].segments) == 1

    def test_discontinuous_target_absent_in_gap(self, discontinuous_sample):
        """The target has no region inside the gap between its two clips."""
        case = discontinuous_sample.expressions[0]
        tube = case.target_tubes[0]
        assert len(tube.segments) == 2
        (_, gap_start), (gap_end, _) = tube.segments
        target = case.target_object_ids[0]
        for t in range(gap_start, gap_end):
            assert all(r.object_id != target for r in discontinuous_sample.regions[t])

    def test_multi_target_share_description(self, multi_sample):
        """Multi-target cases have >= 2 tubes whose objects look alike."""
        case = multi_sample.expressions[0]
        assert len(case.target_tubes) >= 2
        objects = multi_sample.object_map()
        targets = [objects[oid] for oid in case.target_object_ids]
        assert len({(o.category, o.appearance) for o in targets}) == 1
        assert all(t.object_id in case.target_object_ids for t in case.target_tubes)

    def test_target_action(self):
        """target_action fixes the action of the primary case."""
        sample = make_sample("single_target_single_segment", seed=4, target_action="run")
        case = sample.expressions[0]
        assert case.action == "run"
        target = sample.object_map()[case.target_object_ids[0]]
        for f in case.target_tubes[0].frames:
            assert target.action_at(f) == "run"

    def test_tube_regions_are_ground_truth(self, gen_config):
        """Target tubes only reference ground-truth boxes of their own object."""
        for seed in range(10):
            sample = generate_video(gen_config, seed)
            regions = sample.region_map()
            for case in sample.expressions:
                for tube in case.target_tubes:
                    for r in tube.region_ids:
                        assert regions[r].source == "ground_truth"
                        assert regions[r].object_id == tube.object_id

    def test_distractor_labels(self, gen_config):
        """Labels only use the three known names and skip background regions."""
        for seed in range(10):
            sample = generate_video(gen_config, seed)
            regions = sample.region_map()
            for case in sample.expressions:
                for idx, label in case.distractor_labels.items():
                    assert label in ("spatial_distractor", "temporal_distractor", "neutral")
                    assert regions[idx].source != "background"


class TestGeneratorConfig:
    """Test config validation at generation time."""

    @pytest.mark.parametrize("changes", [
        {"num_frames": 10},
        {"num_frames": 65},
        {"num_objects": 1},
        {"num_objects": 9},
        {"case_kind": "both"},
        {"jitter_frac": 0.5},
        {"case_weights": {"single_target_single_segment": 0.0}},
        {"num_objects": 2, "case_kind": "multi_target"},
    ])
    def test_invalid(self, changes):
        """Out-of-range settings raise ConfigError."""
        with pytest.raises(ConfigError):
            generate_video(dataclasses.replace(GeneratorConfig(num_frames=16, num_objects=3), **changes), 0)

    def test_over_budget(self):
        """More regions than the node budget is rejected up front."""
        cfg = GeneratorConfig(num_frames=64, num_objects=8)
        assert cfg.regions_per_video() > cfg.node_budget
        with pytest.raises(ConfigError, match="node budget"):
            generate_video(cfg, 0)

    def test_unknown_action(self):
        """An unknown target_action is rejected."""
        with pytest.raises(ConfigError):
            generate_video(GeneratorConfig(num_frames=16, num_objects=3, target_action="fly"), 0)


class TestValidateSample:
    """Test that corrupted samples are reported."""

    def test_duplicate_region_index(self, easy_sample):
        """Two regions sharing an index are flagged."""
        easy_sample.regions[1][0].region_idx = easy_sample.regions[0][0].region_idx
        assert any("duplicate region_idx" in v for v in validate_sample(easy_sample))

    def test_box_outside_frame(self, easy_sample):
        """A box past the frame edge is flagged."""
        region = easy_sample.regions[0][0]
        region.box = (0.0, 0.0, easy_sample.width + 5.0, 10.0)
        assert any("invalid box" in v for v in validate_sample(easy_sample))

    def test_unknown_source(self, easy_sample):
        """Regions must come from ground truth, jitter or background."""
        easy_sample.regions[0][-1].source = "detector"
        assert any("unknown source 'detector'" in v for v in validate_sample(easy_sample))

    def test_tube_with_missing_region(self, easy_sample):
        """A tube entry naming an unknown region is flagged."""
        tube = easy_sample.expressions[0].target_tubes[0]
        tube.entries[0] = (tube.entries[0][0], 10_000)
        assert any("missing" in v for v in validate_sample(easy_sample))

    def test_wrong_distractor_label(self, gen_config):
        """A target region labelled as a temporal distractor is flagged."""
        sample = generate_video(gen_config, 21)
        case = sample.expressions[0]
        target_region = case.target_tubes[0].region_ids[0]
        case.distractor_labels[target_region] = "temporal_distractor"
        assert any("temporal_distractor" in v for v in validate_sample(sample))
