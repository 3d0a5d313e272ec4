"""Evaluation report writers: CSV tables and an aligned text table."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

from .metrics import EvalReport

REPORT_COLUMNS = ("alpha", "avg_gap_baseline", "avg_gap_reranked", "gap_difference",
                  "mrr_baseline", "mrr_reranked", "mrr_shift", "p_value")


def write_report_csv(reports: Sequence[EvalReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in reports:
            writer.writerow([repr(float(getattr(r, col))) for col in REPORT_COLUMNS])


def read_report_csv(path) -> list[dict[str, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def write_gap_curve_csv(reports: Sequence[EvalReport], path) -> None:
    """One row per position: the baseline curve, then one column per alpha."""
    if not reports:
        raise ValueError("no reports to export")
    k = len(reports[0].gap_curve_baseline)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["position", "baseline"] + [f"alpha={r.alpha!r}" for r in reports])
        for i in range(k):
            writer.writerow([i + 1, repr(reports[0].gap_curve_baseline[i])]
                            + [repr(r.gap_curve_reranked[i]) for r in reports])


def format_report_table(reports: Sequence[EvalReport]) -> str:
    header = ["alpha", "gap base", "gap rerank", "gap diff", "MRR base", "MRR rerank",
              "MRR shift", "p-value"]
    rows = []
    for r in reports:
        diff = f"{r.gap_difference:.2%}" + (" (degenerate)" if r.degenerate_baseline else "")
        rows.append([f"{r.alpha:g}", f"{r.avg_gap_baseline:.4f}", f"{r.avg_gap_reranked:.4f}",
                     diff, f"{r.mrr_baseline:.4f}", f"{r.mrr_reranked:.4f}",
                     f"{r.mrr_shift:+.2%}", f"{r.p_value:.3f}"])
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in rows]
    return "\n".join(lines) + "\n"


def write_report_table(reports: Sequence[EvalReport], path) -> None:
    Path(path).write_text(format_report_table(reports), encoding="utf-8")
