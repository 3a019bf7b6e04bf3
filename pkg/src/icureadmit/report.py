"""Report writers: importance tables, the SVG tag cloud and curve CSVs."""

from __future__ import annotations

import csv
from typing import Sequence
from xml.sax.saxutils import escape, quoteattr

from .errors import ContractError
from .models import FeatureImportance


def write_importance_csv(rows: Sequence[FeatureImportance], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["rank", "term", "importance", "sign"])
    for rank, r in enumerate(rows, start=1):
        w.writerow([rank, r.term, repr(r.importance), "" if r.sign is None else r.sign])


def font_sizes(importances: Sequence[float], font_min: float, font_max: float) -> list[float]:
    """Linear map of importance onto ``[font_min, font_max]``.

    The smallest importance gets ``font_min`` and the largest ``font_max``;
    when all are equal every term gets ``font_max``.
    """
    if not 0 < font_min <= font_max:
        raise ContractError(f"need 0 < font_min <= font_max, got {font_min}, {font_max}")
    if not importances:
        return []
    lo, hi = min(importances), max(importances)
    if hi == lo:
        return [float(font_max)] * len(importances)
    return [font_min + (font_max - font_min) * (v - lo) / (hi - lo) for v in importances]


def tag_cloud_svg(
    rows: Sequence[FeatureImportance],
    font_min: float = 12.0,
    font_max: float = 40.0,
    columns: int = 4,
) -> str:
    """Ranked grid of terms, one ``<text>`` element per term.

    Rank order runs left to right, then top to bottom. Positive linear
    weights are drawn dark red, negative ones dark blue, tree importances
    black.
    """
    if columns < 1:
        raise ContractError("columns must be >= 1")
    sizes = font_sizes([r.importance for r in rows], font_min, font_max)
    longest = max((len(r.term) for r in rows), default=1)
    cell_w = int(longest * font_max * 0.62) + 16
    cell_h = int(font_max * 1.5)
    n_rows = -(-len(rows) // columns) if rows else 0
    width = cell_w * min(columns, max(len(rows), 1))
    height = cell_h * max(n_rows, 1)
    colors = {1: "#8b0000", -1: "#00008b", None: "#000000", 0: "#000000"}
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    ]
    for i, (r, size) in enumerate(zip(rows, sizes)):
        x = (i % columns) * cell_w + cell_w // 2
        y = (i // columns) * cell_h + cell_h // 2
        out.append(
            f'<text x="{x}" y="{y}" font-size="{size:.2f}" fill="{colors[r.sign]}" '
            f'text-anchor="middle" dominant-baseline="middle" '
            f"data-importance={quoteattr(repr(r.importance))}>{escape(r.term)}</text>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_roc_csv(points, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["fpr", "tpr"])
    for fpr, tpr in points:
        w.writerow([repr(float(fpr)), repr(float(tpr))])


def write_histogram_csv(histogram, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["bucket_days", "count"])
    for bucket, count in histogram:
        w.writerow([bucket, count])
