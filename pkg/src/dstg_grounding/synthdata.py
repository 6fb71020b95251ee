"""Synthetic generic-visual-grounding videos with exact ground truth.

Each video holds a handful of boxed objects that move according to a motion
program (one action per segment), per-frame detections (ground-truth boxes,
jittered duplicates, background false positives) and one or two referring
cases. Three case families are produced:

- single_target_single_segment: one object performing the action once
- single_target_discontinuous: one object performing it in two clips split by an occlusion gap
- multi_target: several look-alike objects performing the same action

Everything is a pure function of (config, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import CASE_KINDS, GeneratorConfig
from .errors import ConfigError
from .metrics import box_iou
from .tube import Box, Tube

CATEGORIES = ("person", "animal", "vehicle", "shape")
COLORS = ("red", "orange", "yellow", "green", "blue", "purple", "black", "white")
SIZES = ("small", "medium", "large")
TEXTURES = ("plain", "striped", "dotted", "checkered")
ACTIONS = ("walk", "run", "dance", "wave", "stand", "spin")

SIZE_PX = {"small": 16, "medium": 32, "large": 48}
PLURALS = {"person": "people", "animal": "animals", "vehicle": "vehicles", "shape": "shapes"}
GERUNDS = {
    "walk": "walking",
    "run": "running",
    "dance": "dancing",
    "wave": "waving",
    "stand": "standing",
    "spin": "spinning",
}

SOURCES = ("ground_truth", "jittered", "background")
LABELS = ("spatial_distractor", "temporal_distractor", "neutral")

MIN_EXPRESSION_TOKENS = 5
MAX_EXPRESSION_TOKENS = 22


@dataclass(frozen=True, slots=True)
class Appearance:
    color: str
    size: str
    texture: str

    def overlap(self, other: "Appearance") -> int:
        """Number of shared attributes out of (color, size, texture)."""
        return (
            (self.color == other.color)
            + (self.size == other.size)
            + (self.texture == other.texture)
        )


@dataclass(frozen=True, slots=True)
class Trajectory:
    """Parametric path: linear drift plus an optional sinusoid, in pixels."""

    kind: str
    origin: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    amplitude: tuple[float, float] = (0.0, 0.0)
    period: float = 1.0
    phase: float = 0.0

    def center(self, dt: float) -> tuple[float, float]:
        x = self.origin[0] + self.velocity[0] * dt
        y = self.origin[1] + self.velocity[1] * dt
        if self.kind == "sinusoidal":
            w = 2.0 * math.pi / self.period
            # offsets are zero at dt = 0 so consecutive segments join up
            x += self.amplitude[0] * math.sin(w * dt)
            y += self.amplitude[1] * (math.sin(w * dt + self.phase) - math.sin(self.phase))
        return x, y


@dataclass(slots=True)
class MotionSegment:
    action: str
    start_frame: int
    end_frame: int
    trajectory: Trajectory

    def covers(self, frame: int) -> bool:
        return self.start_frame <= frame < self.end_frame


@dataclass(slots=True)
class SceneObject:
    object_id: int
    category: str
    appearance: Appearance
    motion_program: list[MotionSegment] = field(default_factory=list)

    def segment_at(self, frame: int) -> MotionSegment | None:
        for seg in self.motion_program:
            if seg.covers(frame):
                return seg
        return None

    def action_at(self, frame: int) -> str | None:
        seg = self.segment_at(frame)
        return seg.action if seg else None


@dataclass(slots=True)
class Region:
    region_idx: int
    frame_idx: int
    box: Box
    source: str
    object_id: int | None = None
    parent_idx: int | None = None


@dataclass(slots=True)
class ReferringCase:
    expression: list[str]
    case_kind: str
    action: str
    target_object_ids: list[int]
    target_tubes: list[Tube]
    distractor_labels: dict[int, str] = field(default_factory=dict)


@dataclass(slots=True)
class VideoSample:
    video_id: str
    width: int
    height: int
    num_frames: int
    fps: float
    objects: list[SceneObject]
    regions: list[list[Region]]
    expressions: list[ReferringCase]
    seed: int = 0

    def all_regions(self) -> list[Region]:
        """Regions of every frame, in region_idx order."""
        flat = [r for frame in self.regions for r in frame]
        return sorted(flat, key=lambda r: r.region_idx)

    def region_map(self) -> dict[int, Region]:
        return {r.region_idx: r for frame in self.regions for r in frame}

    def object_map(self) -> dict[int, SceneObject]:
        return {o.object_id: o for o in self.objects}

    def target_regions(self, case: ReferringCase) -> set[int]:
        """Ground-truth tube regions of a case plus their jittered duplicates."""
        gt = {r for tube in case.target_tubes for r in tube.region_ids}
        dups = {r.region_idx for r in self.all_regions() if r.parent_idx in gt}
        return gt | dups


# --- expressions ------------------------------------------------------------

_SINGULAR_TEMPLATES = (
    "the {size} {color} {texture} {noun} is {verb}",
    "a {color} {noun} with {texture} texture {verb} in the scene",
    "find the {size} {noun} that is {color} and {texture} while {verb}",
    "the {color} {texture} {noun} of {size} size which is {verb} for a while",
)
_PLURAL_TEMPLATES = (
    "the {size} {color} {texture} {noun} are {verb} together",
    "all {color} {noun} with {texture} texture {verb} in the scene",
    "find every {size} {noun} that is {color} and {texture} while {verb}",
    "the {color} {texture} {noun} of {size} size which are {verb} at the same time",
)
_SUFFIXES = ("", "near the other objects", "in this video", "at some point in the clip")


def render_expression(case: ReferringCase, objects: list[SceneObject], seed: int) -> list[str]:
    """
    Template sentence naming the targets' category, all three appearance
    attributes and the action.

    The sentence is a function of the attributes and the seed only, so two
    targets that differ only in object_id render identically.
    """
    by_id = {o.object_id: o for o in objects}
    target = by_id[case.target_object_ids[0]]
    plural = len(case.target_object_ids) > 1
    rng = np.random.default_rng(seed)
    templates = _PLURAL_TEMPLATES if plural else _SINGULAR_TEMPLATES
    template = templates[int(rng.integers(len(templates)))]
    suffix = _SUFFIXES[int(rng.integers(len(_SUFFIXES)))]
    text = template.format(
        size=target.appearance.size,
        color=target.appearance.color,
        texture=target.appearance.texture,
        noun=PLURALS[target.category] if plural else target.category,
        verb=GERUNDS[case.action],
    )
    tokens = (text + " " + suffix).split()
    return tokens[:MAX_EXPRESSION_TOKENS]


# --- generation -------------------------------------------------------------

def generate_video(config: GeneratorConfig, seed: int, video_id: str | None = None) -> VideoSample:
    """
    Generate one synthetic video with its referring cases.

    Args:
        config: generator settings (validated here)
        seed: the only source of randomness
        video_id: identifier to store; defaults to "synth-<seed>"

    Raises:
        ConfigError: invalid config, including a flattened region count above the node budget
    """
    config.validate()
    rng = np.random.default_rng(seed)
    kind = _pick_case_kind(config, rng)
    if config.target_action is not None and config.target_action not in ACTIONS:
        raise ConfigError(f"Unknown target_action: {config.target_action}")
    action = config.target_action or str(rng.choice(ACTIONS))

    objects, target_ids = _build_objects(config, rng, kind, action)
    _assign_trajectories(objects, config, rng)
    regions = _build_regions(objects, config, rng)

    sample = VideoSample(
        video_id=video_id or f"synth-{seed}",
        width=config.width,
        height=config.height,
        num_frames=config.num_frames,
        fps=config.fps,
        objects=objects,
        regions=regions,
        expressions=[],
        seed=int(seed),
    )

    primary = _make_case(sample, kind, action, target_ids, int(rng.integers(2**31)))
    sample.expressions.append(primary)

    if kind != "multi_target" and rng.random() < config.secondary_expression_prob:
        target = sample.object_map()[target_ids[0]]
        other_actions = sorted({s.action for s in target.motion_program if s.action != action})
        if other_actions:
            second = str(rng.choice(other_actions))
            case = _make_case(sample, "single_target_single_segment", second, target_ids,
                              int(rng.integers(2**31)))
            # the other action may occur on both sides of the primary one
            if len(case.target_tubes[0].segments) > 1:
                case.case_kind = "single_target_discontinuous"
            sample.expressions.append(case)
    return sample


def _pick_case_kind(config: GeneratorConfig, rng: np.random.Generator) -> str:
    if config.case_kind is not None:
        return config.case_kind
    kinds = [k for k in CASE_KINDS if config.case_weights.get(k, 0) > 0]
    if config.num_objects < 3:
        kinds = [k for k in kinds if k != "multi_target"]
    if not kinds:
        raise ConfigError("No case kind is possible with this config")
    weights = np.array([config.case_weights[k] for k in kinds], dtype=float)
    return kinds[int(rng.choice(len(kinds), p=weights / weights.sum()))]


def _random_appearance(rng: np.random.Generator) -> Appearance:
    return Appearance(
        color=str(rng.choice(COLORS)),
        size=str(rng.choice(SIZES)),
        texture=str(rng.choice(TEXTURES)),
    )


def _vary(app: Appearance, n_changes: int, rng: np.random.Generator) -> Appearance:
    """Copy of app with exactly n_changes attributes replaced by different values."""
    values = {"color": app.color, "size": app.size, "texture": app.texture}
    choices = {"color": COLORS, "size": SIZES, "texture": TEXTURES}
    for attr in rng.permutation(list(values))[:n_changes]:
        options = [v for v in choices[attr] if v != values[attr]]
        values[attr] = str(rng.choice(options))
    return Appearance(**values)


def _pick_category(preferred: str, counts: dict[str, int], cap: int, rng: np.random.Generator) -> str:
    if counts.get(preferred, 0) < cap and rng.random() < 0.5:
        return preferred
    options = [c for c in CATEGORIES if counts.get(c, 0) < cap]
    return str(rng.choice(options))


def _build_objects(
    config: GeneratorConfig, rng: np.random.Generator, kind: str, action: str
) -> tuple[list[SceneObject], list[int]]:
    """Create targets and distractors with their action schedules (trajectories come later)."""
    T = config.num_frames
    category = str(rng.choice(CATEGORIES))
    target_app = _random_appearance(rng)
    other_actions = [a for a in ACTIONS if a != action]

    if kind == "multi_target":
        n_targets = int(rng.integers(2, min(3, config.num_objects - 1, config.max_per_category) + 1))
    else:
        n_targets = 1

    schedules: list[list[tuple[str, int, int]]] = []
    for _ in range(n_targets):
        if kind == "single_target_discontinuous":
            schedules.append(_discontinuous_schedule(T, action, other_actions, config, rng))
        else:
            schedules.append(_single_segment_schedule(T, action, other_actions, rng))

    objects: list[SceneObject] = []
    counts: dict[str, int] = {category: n_targets}
    for sched in schedules:
        obj = SceneObject(len(objects), category, target_app)
        obj.motion_program = [MotionSegment(a, s, e, Trajectory("linear", (0.0, 0.0))) for a, s, e in sched]
        objects.append(obj)
    target_ids = [o.object_id for o in objects]

    roles = ["spatial", "temporal"]
    while len(roles) < config.num_objects - n_targets:
        roles.append(str(rng.choice(["spatial", "temporal", "neutral"])))
    roles = roles[: config.num_objects - n_targets]

    for role in roles:
        cat = _pick_category(category, counts, config.max_per_category, rng)
        counts[cat] = counts.get(cat, 0) + 1
        if role == "spatial":
            app = _vary(target_app, 1, rng)
            sched = _free_schedule(T, other_actions, rng)
        elif role == "temporal":
            app = _vary(target_app, int(rng.integers(2, 4)), rng)
            sched = _single_segment_schedule(T, action, other_actions, rng)
        else:
            app = _random_appearance(rng)
            while cat == category and app == target_app:
                app = _random_appearance(rng)
            sched = _free_schedule(T, list(ACTIONS), rng)
        obj = SceneObject(len(objects), cat, app)
        obj.motion_program = [MotionSegment(a, s, e, Trajectory("linear", (0.0, 0.0))) for a, s, e in sched]
        objects.append(obj)
    return objects, target_ids


def _single_segment_schedule(T, action, other_actions, rng) -> list[tuple[str, int, int]]:
    length = int(rng.integers(max(3, T // 4), max(4, T // 2) + 1))
    start = int(rng.integers(0, T - length + 1))
    sched = []
    if start > 0:
        sched.append((str(rng.choice(other_actions)), 0, start))
    sched.append((action, start, start + length))
    if start + length < T:
        sched.append((str(rng.choice(other_actions)), start + length, T))
    return sched


def _discontinuous_schedule(T, action, other_actions, config, rng) -> list[tuple[str, int, int]]:
    # two clips of the action separated by an occlusion gap (object absent)
    gap = int(rng.integers(config.occlusion_gap_min, config.occlusion_gap_max + 1))
    gap = min(gap, T - 6)
    max_clip = max(3, min(T // 3, (T - gap) // 2))
    first = int(rng.integers(3, max_clip + 1))
    second = int(rng.integers(3, max_clip + 1))
    start = int(rng.integers(0, T - (first + gap + second) + 1))
    gap_start = start + first
    resume = gap_start + gap
    sched = []
    if start > 0:
        sched.append((str(rng.choice(other_actions)), 0, start))
    sched.append((action, start, gap_start))
    sched.append((action, resume, resume + second))
    if resume + second < T:
        sched.append((str(rng.choice(other_actions)), resume + second, T))
    return sched


def _free_schedule(T, actions, rng) -> list[tuple[str, int, int]]:
    n_segments = int(rng.integers(1, 4))
    cuts = sorted(int(c) for c in rng.choice(np.arange(1, T), size=n_segments - 1, replace=False))
    bounds = [0, *cuts, T]
    return [(str(rng.choice(actions)), bounds[k], bounds[k + 1]) for k in range(n_segments)]


def _action_trajectory(action: str, origin: tuple[float, float], rng: np.random.Generator) -> Trajectory:
    heading = float(rng.uniform(0, 2 * math.pi))
    direction = (math.cos(heading), math.sin(heading))
    if action == "walk":
        return Trajectory("linear", origin, (1.5 * direction[0], 1.5 * direction[1]))
    if action == "run":
        return Trajectory("linear", origin, (4.0 * direction[0], 4.0 * direction[1]))
    if action == "dance":
        return Trajectory("sinusoidal", origin, (0.3 * direction[0], 0.3 * direction[1]), (5.0, 0.0), 4.0)
    if action == "wave":
        # period 3 so the sway shows up at whole-frame samples
        return Trajectory("sinusoidal", origin, (0.0, 0.0), (0.0, 3.0), 3.0)
    if action == "spin":
        return Trajectory("sinusoidal", origin, (0.0, 0.0), (4.0, 4.0), 6.0, math.pi / 2)
    return Trajectory("linear", origin)


def _assign_trajectories(objects: list[SceneObject], config: GeneratorConfig, rng: np.random.Generator):
    """Chain trajectories so each segment starts where the previous one ended."""
    for obj in objects:
        half = SIZE_PX[obj.appearance.size] / 2
        pos = (
            float(rng.uniform(half + 8, config.width - half - 8)),
            float(rng.uniform(half + 8, config.height - half - 8)),
        )
        for seg in obj.motion_program:
            traj = _action_trajectory(seg.action, pos, rng)
            duration = seg.end_frame - seg.start_frame
            end = traj.center(duration)
            # turn back when the drift would leave the canvas
            vx, vy = traj.velocity
            if not half <= end[0] <= config.width - half:
                vx = -vx
            if not half <= end[1] <= config.height - half:
                vy = -vy
            traj = Trajectory(traj.kind, traj.origin, (vx, vy), traj.amplitude, traj.period, traj.phase)
            seg.trajectory = traj
            pos = _clamp_center(traj.center(duration), half, config)


def _clamp_center(center, half, config) -> tuple[float, float]:
    return (
        min(max(center[0], half), config.width - half),
        min(max(center[1], half), config.height - half),
    )


def object_box(obj: SceneObject, frame: int, width: int, height: int) -> Box | None:
    """Box of an object at a frame, or None while it is absent."""
    seg = obj.segment_at(frame)
    if seg is None:
        return None
    half = SIZE_PX[obj.appearance.size] / 2
    cx, cy = seg.trajectory.center(frame - seg.start_frame)
    cx = min(max(cx, half), width - half)
    cy = min(max(cy, half), height - half)
    return (round(cx - half, 3), round(cy - half, 3), round(cx + half, 3), round(cy + half, 3))


def _jitter_box(box: Box, frac: float, width: int, height: int, rng: np.random.Generator) -> Box:
    """Uniform center/size noise, resampled until IoU with the source is >= 0.5."""
    w, h = box[2] - box[0], box[3] - box[1]
    cx, cy = (box[0] + box[2]) / 2, (box[1] + box[3]) / 2
    scale = frac
    for _ in range(20):
        ncx = cx + rng.uniform(-scale, scale) * w
        ncy = cy + rng.uniform(-scale, scale) * h
        nw = w * (1 + rng.uniform(-scale, scale))
        nh = h * (1 + rng.uniform(-scale, scale))
        cand = (
            round(max(0.0, ncx - nw / 2), 3),
            round(max(0.0, ncy - nh / 2), 3),
            round(min(float(width), ncx + nw / 2), 3),
            round(min(float(height), ncy + nh / 2), 3),
        )
        if cand[0] < cand[2] and cand[1] < cand[3] and box_iou(cand, box) >= 0.5:
            return cand
        scale /= 2
    return box


def _background_box(config: GeneratorConfig, rng: np.random.Generator) -> Box:
    side = float(SIZE_PX[str(rng.choice(SIZES))])
    x0 = float(rng.uniform(0, config.width - side))
    y0 = float(rng.uniform(0, config.height - side))
    return (round(x0, 3), round(y0, 3), round(x0 + side, 3), round(y0 + side, 3))


def _build_regions(objects: list[SceneObject], config: GeneratorConfig, rng: np.random.Generator) -> list[list[Region]]:
    frames: list[list[Region]] = []
    next_idx = 0
    for t in range(config.num_frames):
        # (source, object_id, box, index of the ground-truth entry it duplicates)
        pending: list[tuple[str, int | None, Box, int | None]] = []
        for obj in objects:
            box = object_box(obj, t, config.width, config.height)
            if box is None:
                continue
            gt_pos = len(pending)
            pending.append(("ground_truth", obj.object_id, box, None))
            for _ in range(config.jitter_per_box):
                pending.append(("jittered", obj.object_id,
                                _jitter_box(box, config.jitter_frac, config.width, config.height, rng),
                                gt_pos))
        for _ in range(config.background_per_frame):
            pending.append(("background", None, _background_box(config, rng), None))

        order = [int(k) for k in rng.permutation(len(pending))]
        assigned = {pos: next_idx + rank for rank, pos in enumerate(order)}
        frame_regions = []
        for pos in order:
            source, object_id, box, parent_pos = pending[pos]
            frame_regions.append(Region(
                region_idx=assigned[pos],
                frame_idx=t,
                box=box,
                source=source,
                object_id=object_id,
                parent_idx=assigned[parent_pos] if parent_pos is not None else None,
            ))
        next_idx += len(pending)
        frames.append(frame_regions)
    return frames


def label_region(region: Region, case: ReferringCase, objects: dict[int, SceneObject]) -> str | None:
    """
    Distractor label of a region for a case, or None for targets and background.

    A spatial distractor shares >= 2 appearance attributes with the target but
    performs a different action at that frame; a temporal distractor performs
    the case action but differs in >= 2 appearance attributes.
    """
    if region.object_id is None:
        return None
    target = objects[case.target_object_ids[0]]
    obj = objects[region.object_id]
    act = obj.action_at(region.frame_idx)
    if region.object_id in case.target_object_ids and act == case.action:
        return None
    overlap = obj.appearance.overlap(target.appearance)
    if overlap >= 2 and act != case.action:
        return "spatial_distractor"
    if overlap <= 1 and act == case.action:
        return "temporal_distractor"
    return "neutral"


def _make_case(sample: VideoSample, kind: str, action: str, target_ids: list[int], seed: int) -> ReferringCase:
    objects = sample.object_map()
    gt_by_frame = {
        (r.frame_idx, r.object_id): r
        for r in sample.all_regions()
        if r.source == "ground_truth"
    }
    tubes = []
    for oid in target_ids:
        obj = objects[oid]
        entries, boxes = [], []
        for t in range(sample.num_frames):
            if obj.action_at(t) == action:
                region = gt_by_frame[(t, oid)]
                entries.append((t, region.region_idx))
                boxes.append(region.box)
        tubes.append(Tube(entries=entries, boxes=boxes, object_id=oid))

    case = ReferringCase(
        expression=[],
        case_kind=kind,
        action=action,
        target_object_ids=list(target_ids),
        target_tubes=tubes,
    )
    for region in sample.all_regions():
        label = label_region(region, case, objects)
        if label is not None:
            case.distractor_labels[region.region_idx] = label
    case.expression = render_expression(case, sample.objects, seed)
    return case


# --- validation -------------------------------------------------------------

def validate_sample(sample: VideoSample) -> list[str]:
    """
    Check every data invariant of a sample.

    Returns:
        list of human-readable violations, empty when the sample is valid
    """
    violations: list[str] = []
    if sample.width <= 0 or sample.height <= 0:
        violations.append(f"non-positive frame size {sample.width}x{sample.height}")
    if sample.num_frames < 2:
        violations.append(f"num_frames {sample.num_frames} < 2")
    if len(sample.regions) != sample.num_frames:
        violations.append(f"{len(sample.regions)} region lists for {sample.num_frames} frames")

    ids = [o.object_id for o in sample.objects]
    if len(set(ids)) != len(ids):
        violations.append("duplicate object_id")
    for obj in sample.objects:
        prev_end = 0
        for seg in obj.motion_program:
            if not 0 <= seg.start_frame < seg.end_frame <= sample.num_frames:
                violations.append(f"object {obj.object_id}: segment [{seg.start_frame}, {seg.end_frame}) out of range")
            if seg.start_frame < prev_end:
                violations.append(f"object {obj.object_id}: motion segments overlap or are unsorted")
            prev_end = max(prev_end, seg.end_frame)

    seen: set[int] = set()
    for t, frame in enumerate(sample.regions):
        for r in frame:
            if r.frame_idx != t:
                violations.append(f"region {r.region_idx} stored in frame {t} but has frame_idx {r.frame_idx}")
            if r.region_idx in seen:
                violations.append(f"duplicate region_idx {r.region_idx}")
            seen.add(r.region_idx)
            if r.source not in SOURCES:
                violations.append(f"region {r.region_idx}: unknown source {r.source!r}")
            x0, y0, x1, y1 = r.box
            if not (0 <= x0 < x1 <= sample.width and 0 <= y0 < y1 <= sample.height):
                violations.append(f"region {r.region_idx}: invalid box {r.box}")

    regions = sample.region_map()
    objects = sample.object_map()
    for k, case in enumerate(sample.expressions):
        violations.extend(_validate_case(k, case, sample, regions, objects))
    return violations


def _validate_case(k, case, sample, regions, objects) -> list[str]:
    out: list[str] = []
    prefix = f"case {k}"
    if not MIN_EXPRESSION_TOKENS <= len(case.expression) <= MAX_EXPRESSION_TOKENS:
        out.append(f"{prefix}: expression length {len(case.expression)} outside [5, 22]")
    missing_targets = [oid for oid in case.target_object_ids if oid not in objects]
    if missing_targets or not case.target_object_ids:
        out.append(f"{prefix}: unknown target objects {missing_targets}")
        return out

    for tube in case.target_tubes:
        for f, r in tube.entries:
            region = regions.get(r)
            if not 0 <= f < sample.num_frames or region is None or region.frame_idx != f:
                out.append(f"{prefix}: tube references missing (frame {f}, region {r})")

    if case.case_kind == "multi_target" and len(case.target_tubes) < 2:
        out.append(f"{prefix}: multi_target case with {len(case.target_tubes)} tube(s)")
    if case.case_kind == "single_target_discontinuous":
        if not any(len(tube.segments) >= 2 for tube in case.target_tubes):
            out.append(f"{prefix}: discontinuous case without a tube of >= 2 segments")

    target = objects[case.target_object_ids[0]]
    for region_idx, label in sorted(case.distractor_labels.items()):
        region = regions.get(region_idx)
        if label not in LABELS:
            out.append(f"{prefix}: region {region_idx} has unknown label {label!r}")
            continue
        if region is None or region.object_id is None:
            out.append(f"{prefix}: {label} region {region_idx} is not an object region")
            continue
        obj = objects[region.object_id]
        act = obj.action_at(region.frame_idx)
        overlap = obj.appearance.overlap(target.appearance)
        problems = []
        if label == "spatial_distractor":
            if overlap < 2:
                problems.append(f"shares only {overlap} appearance attribute(s)")
            if act == case.action:
                problems.append(f"shares the action {case.action!r} of its target")
        elif label == "temporal_distractor":
            if overlap > 1:
                problems.append(f"shares {overlap} appearance attributes")
            if act != case.action:
                problems.append(f"does not perform {case.action!r}")
        if problems:
            out.append(f"{prefix}: {label} region {region_idx} " + " and ".join(problems))
    return out
