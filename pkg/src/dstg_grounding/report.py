"""Static grounding-overlay report: per-case frame mosaics, timelines and an HTML index."""

from __future__ import annotations

import hashlib
import html
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image, ImageDraw

from .grounding import GroundingResult
from .manifest import RunManifest
from .metrics import score_case
from .synthdata import VideoSample
from .tube import Tube

GT_COLOR = (0, 170, 0)
FAIL_COLOR = (220, 0, 0)
PASS_COLOR = (0, 80, 230)
FAIL_VIOU = 0.3

TILE = 128
COLUMNS = 6
TIMELINE_ROW = 14
TIMELINE_CELL = 8

_OBJECT_RGB = {
    "red": (200, 60, 60),
    "orange": (230, 140, 40),
    "yellow": (230, 210, 60),
    "green": (80, 170, 80),
    "blue": (70, 110, 210),
    "purple": (140, 80, 180),
    "black": (30, 30, 30),
    "white": (245, 245, 245),
}


@dataclass(slots=True)
class ReportCase:
    key: str
    expression: str
    case_kind: str
    viou: float
    mosaic: str
    timeline: str
    # one entry per predicted tube
    pred_colors: list[tuple[int, int, int]] = field(default_factory=list)
    placeholders: int = 0
    mosaic_sha256: str = ""


def _placeholder_tile(label: str) -> Image.Image:
    tile = Image.new("RGB", (TILE, TILE), (90, 90, 90))
    draw = ImageDraw.Draw(tile)
    draw.line([(0, 0), (TILE - 1, TILE - 1)], fill=(130, 130, 130))
    draw.line([(0, TILE - 1), (TILE - 1, 0)], fill=(130, 130, 130))
    draw.text((4, 4), label, fill=(255, 255, 255))
    return tile


def render_frame(sample: VideoSample, t: int) -> Image.Image | None:
    """Draw the scene objects of frame t as filled boxes; None when the frame is missing."""
    if t < 0 or t >= len(sample.regions):
        return None
    frame = Image.new("RGB", (sample.width, sample.height), (200, 200, 190))
    draw = ImageDraw.Draw(frame)
    objects = sample.object_map()
    for region in sorted(sample.regions[t], key=lambda r: r.region_idx):
        if region.source != "ground_truth" or region.object_id not in objects:
            continue
        color = _OBJECT_RGB.get(objects[region.object_id].appearance.color, (128, 128, 128))
        draw.rectangle(list(region.box), fill=color, outline=(0, 0, 0))
    return frame


def _scaled(box, sx: float, sy: float) -> list[float]:
    return [box[0] * sx, box[1] * sy, box[2] * sx, box[3] * sy]


def _case_tile(
    sample: VideoSample | None,
    t: int,
    gt_tubes: list[Tube],
    pred_tubes: list[Tube],
    pred_colors: list[tuple[int, int, int]],
    scores: dict[int, float],
) -> tuple[Image.Image, bool]:
    frame = render_frame(sample, t) if sample is not None else None
    if frame is None:
        return _placeholder_tile(f"frame {t} missing"), True
    sx, sy = TILE / frame.width, TILE / frame.height
    tile = frame.resize((TILE, TILE), Image.Resampling.BILINEAR)
    draw = ImageDraw.Draw(tile)
    for tube in gt_tubes:
        box = tube.box_map().get(t)
        if box is not None:
            draw.rectangle(_scaled(box, sx, sy), outline=GT_COLOR, width=2)
    for tube, color in zip(pred_tubes, pred_colors):
        for (f, region), box in zip(tube.entries, tube.boxes):
            if f != t:
                continue
            rect = _scaled(box, sx, sy)
            draw.rectangle(rect, outline=color, width=1)
            if region in scores:
                draw.text((rect[0] + 2, rect[1] + 1), f"{scores[region]:.2f}", fill=color)
    draw.text((3, TILE - 12), f"t={t}", fill=(0, 0, 0))
    return tile, False


def _timeline(num_frames: int, gt_tubes: list[Tube], pred_tubes: list[Tube], pred_colors) -> Image.Image:
    """One row per GT tube (green) and per predicted tube, a cell per frame."""
    rows = [(GT_COLOR, t) for t in gt_tubes] + list(zip(pred_colors, pred_tubes))
    width = max(1, num_frames) * TIMELINE_CELL
    image = Image.new("RGB", (width, max(1, len(rows)) * TIMELINE_ROW), (255, 255, 255))
    draw = ImageDraw.Draw(image)
    for k, (color, tube) in enumerate(rows):
        y0 = k * TIMELINE_ROW + 2
        for start, end in tube.segments:
            draw.rectangle(
                [start * TIMELINE_CELL, y0, end * TIMELINE_CELL - 1, y0 + TIMELINE_ROW - 5],
                fill=color,
            )
    for f in range(0, num_frames, 5):
        draw.line([(f * TIMELINE_CELL, 0), (f * TIMELINE_CELL, image.height - 1)], fill=(210, 210, 210))
    return image


def _save_png(image: Image.Image, path: Path) -> str:
    image.save(path, format="PNG", optimize=False)
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _render_case(
    result: GroundingResult,
    sample: VideoSample | None,
    out_dir: Path,
) -> ReportCase:
    key = f"{result.video_id}#{result.expression_idx}"
    stem = f"{result.video_id}_{result.expression_idx}"
    case = None
    if sample is not None and result.expression_idx < len(sample.expressions):
        case = sample.expressions[result.expression_idx]
    gt_tubes = case.target_tubes if case else []
    viou = score_case(result.tubes, gt_tubes)[0]
    color = FAIL_COLOR if viou < FAIL_VIOU else PASS_COLOR
    pred_colors = [color] * len(result.tubes)

    frames = sorted({f for t in gt_tubes + result.tubes for f in t.frames})
    num_frames = sample.num_frames if sample is not None else (frames[-1] + 1 if frames else 1)
    if not frames:
        frames = list(range(num_frames))
    tiles = []
    placeholders = 0
    for t in frames:
        tile, missing = _case_tile(sample, t, gt_tubes, result.tubes, pred_colors, result.scores)
        tiles.append(tile)
        placeholders += missing

    rows = (len(tiles) + COLUMNS - 1) // COLUMNS
    mosaic = Image.new("RGB", (COLUMNS * TILE, max(1, rows) * TILE), (255, 255, 255))
    for k, tile in enumerate(tiles):
        mosaic.paste(tile, ((k % COLUMNS) * TILE, (k // COLUMNS) * TILE))

    mosaic_name = f"{stem}.png"
    timeline_name = f"{stem}.timeline.png"
    digest = _save_png(mosaic, out_dir / mosaic_name)
    _save_png(_timeline(num_frames, gt_tubes, result.tubes, pred_colors), out_dir / timeline_name)
    return ReportCase(
        key=key,
        expression=" ".join(case.expression) if case else "",
        case_kind=case.case_kind if case else "unknown",
        viou=viou,
        mosaic=mosaic_name,
        timeline=timeline_name,
        pred_colors=pred_colors,
        placeholders=placeholders,
        mosaic_sha256=digest,
    )


def _index_html(cases: list[ReportCase], manifest: RunManifest | None) -> str:
    manifest_json = json.dumps(manifest.to_dict() if manifest else None, indent=2, sort_keys=True)
    parts = [
        "<!DOCTYPE html>",
        "<html><head><meta charset=\"utf-8\"><title>Grounding report</title>",
        "<style>body{font-family:sans-serif} td{vertical-align:top;padding:6px}"
        " .fail{color:#dc0000} .pass{color:#0050e6}</style></head><body>",
        f"<h1>Grounding report ({len(cases)} cases)</h1>",
        "<p>Ground truth in green; predictions in blue, or red when the case vIoU is below "
        f"{FAIL_VIOU}.</p>",
        "<table>",
    ]
    for c in cases:
        cls = "fail" if c.viou < FAIL_VIOU else "pass"
        parts.append(
            "<tr>"
            f"<td><b>{html.escape(c.key)}</b><br>{html.escape(c.case_kind)}<br>"
            f"<span class=\"{cls}\">vIoU {c.viou:.3f}</span><br><i>{html.escape(c.expression)}</i>"
            + (f"<br>{c.placeholders} placeholder tile(s)" if c.placeholders else "")
            + "</td>"
            f"<td><img src=\"{html.escape(c.mosaic)}\" alt=\"frames\"><br>"
            f"<img src=\"{html.escape(c.timeline)}\" alt=\"timeline\"></td>"
            "</tr>"
        )
    parts += [
        "</table>",
        "<h2>Manifest</h2>",
        f"<pre id=\"manifest\">{html.escape(manifest_json)}</pre>",
        "</body></html>",
    ]
    return "\n".join(parts) + "\n"


def emit_report(
    results: list[GroundingResult],
    samples: list[VideoSample],
    out_dir: Path,
    manifest: RunManifest | None = None,
    workers: int = 1,
    verbose: bool = True,
) -> tuple[Path, list[ReportCase]]:
    """
    Render every case to `<video>_<expr>.png` plus a timeline, and write index.html.

    Predictions whose video is absent from the dataset are rendered with
    placeholder tiles. Output does not depend on `workers`.

    Returns:
        (path of index.html, rendered cases in (video_id, expression_idx) order)
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_id = {s.video_id: s for s in samples}
    ordered = sorted(results, key=lambda r: (r.video_id, r.expression_idx))

    def render(result: GroundingResult) -> ReportCase:
        return _render_case(result, by_id.get(result.video_id), out_dir)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cases = list(pool.map(render, ordered))
    else:
        cases = [render(r) for r in ordered]

    for c in cases:
        if c.placeholders and verbose:
            print(f"   [WARN] {c.key}: {c.placeholders} frame(s) missing, placeholder tiles used")

    index = out_dir / "index.html"
    index.write_text(_index_html(cases, manifest), encoding="utf-8")
    if verbose:
        print(f"\n✓ Report with {len(cases)} cases written to {index}\n")
    return index, cases
