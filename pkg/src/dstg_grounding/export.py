"""Predictions JSON-lines, evaluation report JSON and per-case CSV export."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable

from .config import canonical_json
from .errors import DatasetError
from .grounding import GroundingResult
from .manifest import RunManifest
from .metrics import THRESHOLDS, CaseRow, EvalReport

PREDICTIONS_SCHEMA = "pred/1"

CASE_COLUMNS = [
    "video_id",
    "expression_idx",
    "case_kind",
    "num_gt",
    "num_pred",
    "viou",
    "tiou",
    *[f"viou@{r:.1f}" for r in THRESHOLDS],
    *[f"tiou@{r:.1f}" for r in THRESHOLDS],
    "missing",
]


def save_predictions(path: Path, results: Iterable[GroundingResult], manifest: RunManifest) -> Path:
    """One canonical JSON line per result after a manifest header line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ordered = sorted(results, key=lambda r: (r.video_id, r.expression_idx))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(canonical_json({"schema": PREDICTIONS_SCHEMA, "manifest": manifest.to_dict()}) + "\n")
        for result in ordered:
            f.write(canonical_json(result.to_dict()) + "\n")
    return path


def load_predictions(path: Path) -> tuple[list[GroundingResult], RunManifest | None]:
    """
    Read a predictions file.

    Raises:
        FileNotFoundError: path does not exist
        DatasetError: malformed line, wrong schema or duplicate (video, expression)
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Predictions not found: {path}")

    results: list[GroundingResult] = []
    manifest = None
    seen: set[tuple[str, int]] = set()
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
                if data.get("schema") != PREDICTIONS_SCHEMA:
                    raise DatasetError(f"{path}: unsupported predictions schema {data.get('schema')!r}")
                manifest = RunManifest.from_dict(data["manifest"])
                continue
            try:
                result = GroundingResult.from_dict(data)
            except (KeyError, TypeError, ValueError) as e:
                raise DatasetError(f"{path}:{line_no}: malformed prediction ({e})")
            key = (result.video_id, result.expression_idx)
            if key in seen:
                raise DatasetError(f"{path}:{line_no}: duplicate prediction for {key[0]}#{key[1]}")
            seen.add(key)
            results.append(result)
    return results, manifest


def save_report(path: Path, report: EvalReport, manifest: RunManifest | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = report.to_dict()
    data["manifest"] = manifest.to_dict() if manifest else None
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _case_values(row: CaseRow) -> dict[str, object]:
    values: dict[str, object] = {
        "video_id": row.video_id,
        "expression_idx": row.expression_idx,
        "case_kind": row.case_kind,
        "num_gt": row.num_gt,
        "num_pred": row.num_pred,
        "viou": f"{row.viou:.6f}",
        "tiou": f"{row.tiou:.6f}",
        "missing": int(row.missing),
    }
    for key, v in row.viou_at.items():
        values[f"viou@{key}"] = f"{v:.6f}"
    for key, v in row.tiou_at.items():
        values[f"tiou@{key}"] = f"{v:.6f}"
    return values


def export_cases_csv(
    rows: list[CaseRow],
    output_path: Path,
    selected_columns: list[str] | None = None,
    verbose: bool = True,
) -> int:
    """
    Export per-case evaluation rows to CSV.

    Args:
        rows: EvalReport.rows
        output_path: CSV file to write
        selected_columns: subset of CASE_COLUMNS (None = all); unknown names are skipped with a warning

    Returns:
        number of data rows written
    """
    if selected_columns is None:
        columns = list(CASE_COLUMNS)
    else:
        columns = []
        for col in selected_columns:
            if col in CASE_COLUMNS:
                columns.append(col)
            elif verbose:
                print(f"[WARN] Column '{col}' not found. Skipping.")
        if not columns:
            raise DatasetError("No valid columns selected")

    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            values = _case_values(row)
            writer.writerow([values[c] for c in columns])

    if verbose:
        print(f"\n✓ Exported {len(rows)} rows to {output_path}")
        print(f"  Columns: {', '.join(columns)}\n")
    return len(rows)
