"""Console formatting for evaluation reports, study tables and grounding results."""

from __future__ import annotations

from typing import Any

from .grounding import GroundingResult
from .metrics import EvalReport


def print_report(report: EvalReport, header: str = "Evaluation"):
    """
    Print the headline metrics of an EvalReport.

    Format:
    Evaluation [split] (N cases):
       m_vIoU  0.412 | vIoU@0.3 0.55 | vIoU@0.5 0.41 | vIoU@0.7 0.20
       m_tIoU  0.631 | tIoU@0.3 0.80 | tIoU@0.5 0.66 | tIoU@0.7 0.42
    """
    if report.num_cases == 0:
        print(f"\n{header} [{report.split}]: 0 cases\n")
        return

    print(f"\n{header} [{report.split}] ({report.num_cases} cases):\n")
    viou = " | ".join(f"vIoU@{k} {v:.2f}" for k, v in report.viou_at.items())
    tiou = " | ".join(f"tIoU@{k} {v:.2f}" for k, v in report.tiou_at.items())
    print(f"   m_vIoU  {report.m_viou:.3f} | {viou}")
    print(f"   m_tIoU  {report.m_tiou:.3f} | {tiou}")

    if report.missing:
        shown = ", ".join(report.missing[:5])
        more = f" (+{len(report.missing) - 5} more)" if len(report.missing) > 5 else ""
        print(f"\n   [WARN] {len(report.missing)} case(s) without predictions: {shown}{more}")

    by_kind: dict[str, list[float]] = {}
    for row in report.rows:
        by_kind.setdefault(row.case_kind, []).append(row.viou)
    if len(by_kind) > 1:
        print("\n   By case kind:")
        for kind in sorted(by_kind):
            values = by_kind[kind]
            print(f"     {kind:32s} {len(values):4d} cases  m_vIoU {sum(values) / len(values):.3f}")
    print()


def print_study(study: str, rows: list[dict[str, Any]]):
    """Print study rows as an aligned table (nested dicts and lists skipped)."""
    if not rows:
        print(f"\n{study}: no rows\n")
        return
    columns = [k for k, v in rows[0].items() if not isinstance(v, (dict, list))]

    def fmt(value) -> str:
        if isinstance(value, bool):
            return "yes" if value else "-"
        if isinstance(value, float):
            return f"{value:.3f}"
        return str(value)

    cells = [[fmt(row[c]) for c in columns] for row in rows]
    widths = [max(len(c), *(len(r[k]) for r in cells)) for k, c in enumerate(columns)]
    print(f"\n{study} ({len(rows)} rows):\n")
    print("   " + "  ".join(c.ljust(w) for c, w in zip(columns, widths)))
    print("   " + "  ".join("-" * w for w in widths))
    for r in cells:
        print("   " + "  ".join(v.ljust(w) for v, w in zip(r, widths)))
    print()


def print_grounding_summary(results: list[GroundingResult]):
    """One line per case: tube count and the segments of the best tube."""
    if not results:
        print("\nGrounding: 0 cases\n")
        return
    print(f"\nGrounding ({len(results)} cases):\n")
    for result in results:
        if not result.tubes:
            print(f"   {result.video_id}#{result.expression_idx}: no tube")
            continue
        best = result.tubes[0]
        segments = ", ".join(f"[{s},{e})" for s, e in best.segments)
        print(f"   {result.video_id}#{result.expression_idx}: {len(result.tubes)} tube(s), "
              f"best score {best.score:.3f}, frames {segments}")
    print()
