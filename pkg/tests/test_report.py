"""Tests for the static grounding-overlay report."""

import io
from contextlib import redirect_stdout

from PIL import Image

from dstg_grounding.grounding import GroundingResult
from dstg_grounding.manifest import make_manifest
from dstg_grounding.report import (
    FAIL_COLOR,
    GT_COLOR,
    PASS_COLOR,
    TIMELINE_ROW,
    emit_report,
    render_frame,
)
from tests.conftest import box_tube


def _colors(path) -> set:
    image = Image.open(path).convert("RGB")
    return {color for _, color in image.getcolors(maxcolors=image.width * image.height)}


def _perfect(sample):
    return [GroundingResult(sample.video_id, 0, list(sample.expressions[0].target_tubes))]


class TestEmitReport:
    """Test mosaics, timelines and the HTML index."""

    def test_perfect_predictions_pass(self, tmp_path, easy_sample):
        """Exact predictions are drawn in the pass color and never in red."""
        index, cases = emit_report(_perfect(easy_sample), [easy_sample], tmp_path, verbose=False)
        case = cases[0]
        assert case.viou == 1.0
        assert case.pred_colors == [PASS_COLOR] * len(easy_sample.expressions[0].target_tubes)
        colors = _colors(tmp_path / case.mosaic)
        assert PASS_COLOR in colors
        assert FAIL_COLOR not in colors
        assert index.name == "index.html"

    def test_wrong_prediction_is_red(self, tmp_path, easy_sample):
        """A prediction far from the target is drawn in the fail color."""
        gt = easy_sample.expressions[0].target_tubes[0]
        wrong = box_tube(gt.frames, box=(1.0, 1.0, 6.0, 6.0), first_region=10_000)
        _, cases = emit_report([GroundingResult(easy_sample.video_id, 0, [wrong])], [easy_sample],
                               tmp_path, verbose=False)
        assert cases[0].viou < 0.3
        assert cases[0].pred_colors == [FAIL_COLOR]
        assert FAIL_COLOR in _colors(tmp_path / cases[0].mosaic)

    def test_empty_predictions(self, tmp_path, easy_sample):
        """Without predictions the timeline holds only ground-truth rows."""
        gt = easy_sample.expressions[0].target_tubes
        _, cases = emit_report([GroundingResult(easy_sample.video_id, 0, [])], [easy_sample],
                               tmp_path, verbose=False)
        timeline = Image.open(tmp_path / cases[0].timeline)
        assert timeline.height == len(gt) * TIMELINE_ROW
        colors = _colors(tmp_path / cases[0].timeline)
        assert GT_COLOR in colors
        assert PASS_COLOR not in colors
        assert FAIL_COLOR not in colors

    def test_regeneration_identical(self, tmp_path, small_dataset):
        """Rendering twice, or with several workers, writes the same bytes."""
        results = [r for s in small_dataset for r in _perfect(s)]
        manifest = make_manifest("report")
        outputs = []
        for name, workers in (("a", 1), ("b", 1), ("c", 4)):
            emit_report(results, small_dataset, tmp_path / name, manifest, workers=workers, verbose=False)
            outputs.append({p.name: p.read_bytes() for p in sorted((tmp_path / name).iterdir())})
        assert outputs[0] == outputs[1] == outputs[2]
        assert len(outputs[0]) == 2 * len(results) + 1

    def test_missing_video_placeholders(self, tmp_path, easy_sample):
        """Predictions for an unknown video get placeholder tiles and a warning."""
        results = [GroundingResult("ghost", 0, [box_tube([0, 1])])]
        output = io.StringIO()
        with redirect_stdout(output):
            _, cases = emit_report(results, [easy_sample], tmp_path)
        assert cases[0].placeholders == 2
        assert cases[0].case_kind == "unknown"
        assert "[WARN] ghost#0: 2 frame(s) missing" in output.getvalue()
        assert (tmp_path / "ghost_0.png").exists()

    def test_manifest_in_index(self, tmp_path, easy_sample):
        """index.html embeds the run manifest."""
        index, _ = emit_report(_perfect(easy_sample), [easy_sample], tmp_path,
                               make_manifest("report", seed=9), verbose=False)
        text = index.read_text()
        assert '<pre id="manifest">' in text
        assert "2023-11-14T22:13:20Z" in text
        assert f"{easy_sample.video_id}_0.png" in text

    def test_cases_sorted(self, tmp_path, small_dataset):
        """Cases come back in (video, expression) order."""
        results = [r for s in reversed(small_dataset) for r in _perfect(s)]
        _, cases = emit_report(results, small_dataset, tmp_path, verbose=False)
        assert [c.key for c in cases] == sorted(c.key for c in cases)


class TestRenderFrame:
    """Test frame rendering."""

    def test_size(self, easy_sample):
        """Frames have the video's size."""
        frame = render_frame(easy_sample, 0)
        assert frame.size == (easy_sample.width, easy_sample.height)

    def test_out_of_range(self, easy_sample):
        """Missing frames render as None."""
        assert render_frame(easy_sample, -1) is None
        assert render_frame(easy_sample, easy_sample.num_frames) is None
