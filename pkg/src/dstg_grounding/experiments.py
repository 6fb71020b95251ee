"""Studies that train several configurations and compare held-out scores."""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np

from .config import ExperimentConfig, canonical_json
from .grounding import GroundingResult, ground, grounding_graphs, random_anchor_baseline
from .metrics import THRESHOLDS, CaseTruth, EvalReport, match_and_score
from .stgraph import DualGraph
from .synthdata import VideoSample
from .trainer import prepare_graphs, train

# (sgb, tgb, scl, tcl, sa, ca), top to bottom
ABLATION_ROWS = (
    (True, False, False, False, False, False),
    (True, True, False, False, False, False),
    (True, False, True, False, False, False),
    (False, True, False, True, False, False),
    (True, True, True, True, False, False),
    (True, True, True, True, True, False),
    (True, True, True, True, True, True),
)
FLAG_NAMES = ("sgb", "tgb", "scl", "tcl", "sa", "ca")
TIE_TOLERANCE = 0.01


def case_truths(samples: list[VideoSample]) -> list[CaseTruth]:
    return [
        CaseTruth(s.video_id, e, case.case_kind, case.target_tubes)
        for s in samples
        for e, case in enumerate(s.expressions)
    ]


def results_by_case(results: list[GroundingResult]) -> dict[tuple[str, int], list]:
    return {(r.video_id, r.expression_idx): r.tubes for r in results}


def ground_dataset(model, vocab, samples, cfg: ExperimentConfig, graphs: list[DualGraph | None] | None = None) -> list[GroundingResult]:
    if graphs is None:
        graphs = grounding_graphs(samples, cfg)
    return [
        ground(sample, e, model, vocab, cfg, graph=graph)
        for sample, graph in zip(samples, graphs)
        for e in range(len(sample.expressions))
    ]


def evaluate(results: list[GroundingResult], samples: list[VideoSample], split: str = "all") -> EvalReport:
    return match_and_score(results_by_case(results), case_truths(samples), split)


class _Workbench:
    """Train/eval samples with graphs built once and reused by every row."""

    def __init__(self, train_samples, eval_samples, base_cfg: ExperimentConfig, verbose: bool):
        self.train_samples = train_samples
        self.eval_samples = eval_samples
        self.base_cfg = base_cfg
        self.verbose = verbose
        self.train_graphs = prepare_graphs(train_samples, base_cfg, verbose=verbose)
        self.eval_graphs = grounding_graphs(eval_samples, base_cfg, verbose=verbose)

    def run(self, cfg: ExperimentConfig) -> list[GroundingResult]:
        result = train(self.train_samples, cfg, graphs=self.train_graphs, verbose=self.verbose)
        return ground_dataset(result.model, result.checkpoint.vocab, self.eval_samples, cfg, self.eval_graphs)


def _with(cfg: ExperimentConfig, seed: int, **changes) -> ExperimentConfig:
    model_changes = {k: v for k, v in changes.items() if k in FLAG_NAMES}
    train_changes = {k: v for k, v in changes.items() if k not in FLAG_NAMES}
    return replace(
        cfg,
        model=replace(cfg.model, **model_changes),
        train=replace(cfg.train, seed=seed, **train_changes),
    )


def _median(values: list[float]) -> float:
    return float(np.median(values)) if values else 0.0


def run_ablation(
    train_samples: list[VideoSample],
    eval_samples: list[VideoSample],
    base_cfg: ExperimentConfig,
    seeds=(0, 1, 2),
    verbose: bool = True,
) -> list[dict[str, Any]]:
    """One row per module configuration: flags, per-seed m_vIoU and the median."""
    bench = _Workbench(train_samples, eval_samples, base_cfg, verbose)
    rows = []
    for flags in ABLATION_ROWS:
        switches = dict(zip(FLAG_NAMES, flags))
        scores = []
        for seed in seeds:
            cfg = _with(base_cfg, seed, **switches)
            scores.append(evaluate(bench.run(cfg), eval_samples).m_viou)
        rows.append({**switches, "m_viou_per_seed": scores, "m_viou": _median(scores)})
    return rows


def run_method_comparison(
    train_samples: list[VideoSample],
    eval_samples: list[VideoSample],
    base_cfg: ExperimentConfig,
    seeds=(0, 1, 2),
    verbose: bool = True,
) -> list[dict[str, Any]]:
    """Full model, the model trained without the contrastive term, and the random-anchor baseline."""
    bench = _Workbench(train_samples, eval_samples, base_cfg, verbose)
    methods = {"DSTG": [], "DSTG w/o STCR": [], "random anchor": []}
    for seed in seeds:
        methods["DSTG"].append(evaluate(bench.run(_with(base_cfg, seed)), eval_samples))
        methods["DSTG w/o STCR"].append(evaluate(bench.run(_with(base_cfg, seed, lambda_=0.0)), eval_samples))
        baseline = [
            random_anchor_baseline(s, e, seed)
            for s in eval_samples
            for e in range(len(s.expressions))
        ]
        methods["random anchor"].append(evaluate(baseline, eval_samples))
    return [_summary_row({"method": name}, reports) for name, reports in methods.items()]


def _summary_row(prefix: dict[str, Any], reports: list[EvalReport]) -> dict[str, Any]:
    keys = [f"{r:.1f}" for r in THRESHOLDS]
    return {
        **prefix,
        "m_viou": _median([r.m_viou for r in reports]),
        "viou_at": {k: _median([r.viou_at[k] for r in reports]) for k in keys},
        "m_tiou": _median([r.m_tiou for r in reports]),
        "tiou_at": {k: _median([r.tiou_at[k] for r in reports]) for k in keys},
        "m_viou_per_seed": [r.m_viou for r in reports],
    }


def run_split_study(
    train_samples: list[VideoSample],
    eval_samples: list[VideoSample],
    base_cfg: ExperimentConfig,
    seeds=(0, 1, 2),
    verbose: bool = True,
) -> list[dict[str, Any]]:
    """Full model scored separately on the vg_easy, sg_hard and tg_hard splits."""
    bench = _Workbench(train_samples, eval_samples, base_cfg, verbose)
    per_split: dict[str, list[EvalReport]] = {"vg_easy": [], "sg_hard": [], "tg_hard": []}
    for seed in seeds:
        results = bench.run(_with(base_cfg, seed))
        for split in per_split:
            per_split[split].append(evaluate(results, eval_samples, split))
    return [
        {**_summary_row({"split": split}, reports), "num_cases": reports[0].num_cases if reports else 0}
        for split, reports in per_split.items()
    ]


def run_negative_ratio_sweep(
    train_samples: list[VideoSample],
    eval_samples: list[VideoSample],
    base_cfg: ExperimentConfig,
    ratios=(1, 5, 20),
    seeds=(0, 1, 2),
    verbose: bool = True,
) -> list[dict[str, Any]]:
    """
    m_vIoU per negative ratio. The `strict` column marks whether a row beats
    every other row by more than TIE_TOLERANCE.
    """
    bench = _Workbench(train_samples, eval_samples, base_cfg, verbose)
    rows = []
    for ratio in ratios:
        reports = [
            evaluate(bench.run(_with(base_cfg, seed, negative_ratio=int(ratio))), eval_samples)
            for seed in seeds
        ]
        rows.append(_summary_row({"negative_ratio": int(ratio)}, reports))
    for row in rows:
        others = [o["m_viou"] for o in rows if o is not row]
        row["strict"] = all(row["m_viou"] > o + TIE_TOLERANCE for o in others)
    return rows


STUDIES = {
    "modules": run_ablation,
    "methods": run_method_comparison,
    "splits": run_split_study,
    "ratios": run_negative_ratio_sweep,
}


def rows_to_markdown(rows: list[dict[str, Any]]) -> str:
    """Markdown table; nested dicts become one column per key, lists are dropped."""
    if not rows:
        return "_no rows_\n"
    columns: list[str] = []
    for key, value in rows[0].items():
        if isinstance(value, dict):
            columns.extend(f"{key}@{k}" for k in value)
        elif not isinstance(value, list):
            columns.append(key)

    def cell(row, column):
        if "@" in column:
            key, sub = column.split("@", 1)
            value = row[key][sub]
        else:
            value = row[column]
        if isinstance(value, bool):
            return "✓" if value else ""
        if isinstance(value, float):
            return f"{value:.3f}"
        return str(value)

    lines = [
        "| " + " | ".join(columns) + " |",
        "|" + "|".join("---" for _ in columns) + "|",
    ]
    for row in rows:
        lines.append("| " + " | ".join(cell(row, c) for c in columns) + " |")
    return "\n".join(lines) + "\n"


def write_study(out_path: Path, study: str, rows: list[dict[str, Any]], manifest=None) -> tuple[Path, Path]:
    """Write `<out>.json` and a markdown table next to it."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"study": study, "rows": rows, "manifest": manifest.to_dict() if manifest else None}
    out_path.write_text(json.dumps(json.loads(canonical_json(payload)), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    md_path = out_path.with_suffix(".md")
    md_path.write_text(f"## {study}\n\n" + rows_to_markdown(rows), encoding="utf-8")
    return out_path, md_path
