"""Annotation resolution, error-class prevalence, and report emission.

Outputs are byte-deterministic for identical inputs: report.json (full
machine-readable values), tables.csv (RFC 4180, flat rows), and chart-*.svg
(SVG 1.1, no external resources).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from overlap_lab.errors import IoFailure
from overlap_lab.model import (
    ERROR_CLASSES,
    EnsembleResult,
    ErrorAnnotation,
    OverlapPartition,
    SubsetCorrectnessTable,
)
from overlap_lab.store import annotation_payload

REPORT_NAME = "report.json"
TABLES_NAME = "tables.csv"


def format_percent(value: Fraction | int, decimals: int = 3) -> str:
    """Exact rational -> percent text, rounded half-up (e.g. 7/8 -> '87.500')."""
    value = Fraction(value)
    scale = 10**decimals
    scaled, rem = divmod(value.numerator * 100 * scale, value.denominator)
    if 2 * rem >= value.denominator:
        scaled += 1
    text = str(scaled).rjust(decimals + 1, "0")
    return f"{text[:-decimals]}.{text[-decimals:]}"


# ---------------------------------------------------------------------------
# Annotation resolution and prevalence

def resolve_annotations(
    entries: Sequence[ErrorAnnotation],
) -> dict[str, ErrorAnnotation]:
    """Per image, the latest-timestamp entry wins; ties go to the later line."""
    best: dict[str, tuple[Any, ErrorAnnotation]] = {}
    for position, entry in enumerate(entries):
        key = (entry.timestamp, position)
        current = best.get(entry.image_id)
        if current is None or key > current[0]:
            best[entry.image_id] = (key, entry)
    return {image_id: entry for image_id, (_, entry) in best.items()}


def conflicting_annotations(
    entries: Sequence[ErrorAnnotation],
) -> dict[str, tuple[str, ...]]:
    """Images annotated with more than one distinct error class."""
    seen: dict[str, set[str]] = {}
    for entry in entries:
        seen.setdefault(entry.image_id, set()).add(entry.error_class)
    return {
        image_id: tuple(sorted(classes))
        for image_id, classes in sorted(seen.items())
        if len(classes) > 1
    }


@dataclass(frozen=True)
class PrevalenceReport:
    """Error-class counts and percents over the annotated hard images."""

    counts: dict[str, int]  # every error class, zero included
    percents: dict[str, Fraction]  # of annotated hard images; zeros when none
    annotated: int
    unannotated: int  # hard images with no annotation yet
    strays: tuple[str, ...]  # annotated ids that are not in the hard set


def prevalence(
    resolved: Mapping[str, ErrorAnnotation], hard: Iterable[str]
) -> PrevalenceReport:
    """Prevalence of each error class among annotated hard images."""
    hard_set = set(hard)
    strays = tuple(sorted(i for i in resolved if i not in hard_set))
    counts = {cls: 0 for cls in ERROR_CLASSES}
    annotated = 0
    for image_id, entry in resolved.items():
        if image_id in hard_set:
            counts[entry.error_class] += 1
            annotated += 1
    percents = {
        cls: Fraction(counts[cls] * 100, annotated) if annotated else Fraction(0)
        for cls in ERROR_CLASSES
    }
    return PrevalenceReport(
        counts=counts,
        percents=percents,
        annotated=annotated,
        unannotated=len(hard_set) - annotated,
        strays=strays,
    )


def prevalence_payload(
    report: PrevalenceReport,
    disagreements: Mapping[str, tuple[str, ...]] | None = None,
) -> dict[str, Any]:
    """JSON-ready view of a prevalence report (percents at 2 decimals)."""
    return {
        "classes": {
            cls: {
                "count": report.counts[cls],
                "percent": format_percent(report.percents[cls] / 100, decimals=2),
            }
            for cls in ERROR_CLASSES
        },
        "annotated": report.annotated,
        "unannotated": report.unannotated,
        "strays": list(report.strays),
        "disagreements": {
            image_id: list(classes)
            for image_id, classes in sorted((disagreements or {}).items())
        },
    }


# ---------------------------------------------------------------------------
# Report assembly

@dataclass(frozen=True)
class AccuracyGrid:
    """A rows-by-methods grid of accuracies (e.g. single/vote/cp-avg rows)."""

    columns: tuple[str, ...]
    rows: tuple[tuple[str, tuple[Fraction, ...]], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        rows = tuple((label, tuple(cells)) for label, cells in self.rows)
        object.__setattr__(self, "rows", rows)
        for label, cells in rows:
            if len(cells) != len(self.columns):
                raise ValueError(
                    f"row {label!r} has {len(cells)} cells for "
                    f"{len(self.columns)} columns"
                )


def _accuracy_json(value: Fraction) -> dict[str, Any]:
    return {
        "numerator": value.numerator,
        "denominator": value.denominator,
        "percent": format_percent(value),
    }


def _overlap_section(label: str, partition: OverlapPartition) -> dict[str, Any]:
    return {
        "label": label,
        "n_runs": partition.n_runs,
        "num_images": partition.num_images,
        "group_sizes": list(partition.group_sizes),
        "hard": partition.group_sizes[0],
        "easy": partition.group_sizes[partition.n_runs],
    }


def _subset_section(label: str, table: SubsetCorrectnessTable) -> dict[str, Any]:
    return {
        "label": label,
        "methods": list(table.methods),
        "counts": [
            {
                "mask": mask,
                "methods": list(table.subset_names(mask)),
                "count": table.counts[mask],
            }
            for mask in sorted(table.counts)
        ],
    }


def _ensemble_section(label: str, result: EnsembleResult) -> dict[str, Any]:
    return {
        "label": label,
        "rule": result.rule,
        "member_run_ids": list(result.member_run_ids),
        "num_images": len(result.predictions),
        "accuracy": _accuracy_json(result.accuracy),
    }


def _grid_section(label: str, grid: AccuracyGrid) -> dict[str, Any]:
    return {
        "label": label,
        "columns": list(grid.columns),
        "rows": [
            {"label": row_label, "cells": [_accuracy_json(c) for c in cells]}
            for row_label, cells in grid.rows
        ],
    }


def _tables_csv(
    overlaps: Sequence[tuple[str, OverlapPartition]],
    subset_tables: Sequence[tuple[str, SubsetCorrectnessTable]],
    ensembles: Sequence[tuple[str, EnsembleResult]],
    grids: Sequence[tuple[str, AccuracyGrid]],
    prev: PrevalenceReport | None,
) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)  # csv defaults to RFC 4180 CRLF line endings
    writer.writerow(["section", "label", "row", "column", "value"])
    for label, partition in overlaps:
        for overlap in range(partition.n_runs, -1, -1):
            writer.writerow(
                ["overlap", label, f"o={overlap}", "images",
                 str(partition.group_sizes[overlap])]
            )
    for label, table in subset_tables:
        for mask in sorted(table.counts):
            names = table.subset_names(mask)
            writer.writerow(
                ["subset_correctness", label, "+".join(names) or "(none)",
                 "images", str(table.counts[mask])]
            )
    for label, result in ensembles:
        writer.writerow(
            ["ensemble", label, result.rule, "accuracy_percent",
             format_percent(result.accuracy)]
        )
    for label, grid in grids:
        for row_label, cells in grid.rows:
            for column, cell in zip(grid.columns, cells):
                writer.writerow(
                    ["grid", label, row_label, column, format_percent(cell)]
                )
    if prev is not None:
        for cls in ERROR_CLASSES:
            writer.writerow(["prevalence", cls, "count", "images",
                             str(prev.counts[cls])])
            writer.writerow(["prevalence", cls, "percent", "of_annotated",
                             format_percent(prev.percents[cls] / 100, decimals=2)])
    return buffer.getvalue()


# ---------------------------------------------------------------------------
# SVG charts (self-contained, deterministic output)

_FONT = "Helvetica, Arial, sans-serif"
_BAR_WIDTH = 600.0
_BAR_HEIGHT = 26
_BAR_GAP = 14
_LABEL_WIDTH = 170
_MARGIN = 20


def _segment_color(overlap: int, n_runs: int) -> str:
    # green for all-correct down to red for never-correct
    top = (0x2F, 0x9E, 0x44)
    bottom = (0xE0, 0x31, 0x31)
    t = overlap / n_runs if n_runs else 0.0
    rgb = tuple(round(b + (a - b) * t) for a, b in zip(top, bottom))
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _esc(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def overlap_chart(sections: Sequence[tuple[str, OverlapPartition]]) -> str:
    """Stacked horizontal bar per partition, segments from o=N down to o=0."""
    height = 2 * _MARGIN + 30 + len(sections) * (_BAR_HEIGHT + _BAR_GAP)
    width = _LABEL_WIDTH + _BAR_WIDTH + 2 * _MARGIN
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width:.0f}" height="{height}" '
        f'viewBox="0 0 {width:.0f} {height}" font-family="{_FONT}">\n',
        f'<text x="{_MARGIN}" y="{_MARGIN + 10}" font-size="14" '
        f'font-weight="bold">Prediction overlap (all correct &#8594; none correct)'
        f"</text>\n",
    ]
    y = _MARGIN + 30
    for label, partition in sections:
        total = partition.num_images
        parts.append(
            f'<text x="{_MARGIN}" y="{y + _BAR_HEIGHT / 2 + 4:.1f}" '
            f'font-size="12">{_esc(label)}</text>\n'
        )
        bar_x = _MARGIN + _LABEL_WIDTH
        if total == 0:
            parts.append(
                f'<rect x="{bar_x:.2f}" y="{y}" width="{_BAR_WIDTH:.2f}" '
                f'height="{_BAR_HEIGHT}" fill="none" stroke="#adb5bd"/>\n'
            )
        else:
            # cumulative rounded edges keep the segment widths summing to the bar
            edges = [
                round(bar_x + _BAR_WIDTH * cum / total, 2)
                for cum in _cumulative(partition)
            ]
            for k, overlap in enumerate(range(partition.n_runs, -1, -1)):
                seg_w = round(edges[k + 1] - edges[k], 2)
                if seg_w <= 0:
                    continue
                count = partition.group_sizes[overlap]
                color = _segment_color(overlap, partition.n_runs)
                parts.append(
                    f'<rect x="{edges[k]:.2f}" y="{y}" width="{seg_w:.2f}" '
                    f'height="{_BAR_HEIGHT}" fill="{color}">'
                    f"<title>{_esc(label)}: o={overlap}, {count} images</title>"
                    f"</rect>\n"
                )
                if seg_w >= 30:
                    parts.append(
                        f'<text x="{edges[k] + seg_w / 2:.2f}" '
                        f'y="{y + _BAR_HEIGHT / 2 + 4:.1f}" font-size="10" '
                        f'fill="#ffffff" text-anchor="middle">{count}</text>\n'
                    )
        y += _BAR_HEIGHT + _BAR_GAP
    parts.append("</svg>\n")
    return "".join(parts)


def _cumulative(partition: OverlapPartition) -> list[int]:
    cum = [0]
    for overlap in range(partition.n_runs, -1, -1):
        cum.append(cum[-1] + partition.group_sizes[overlap])
    return cum


def prevalence_chart(report: PrevalenceReport) -> str:
    """Horizontal bar per error class, width proportional to prevalence."""
    height = 2 * _MARGIN + 30 + len(ERROR_CLASSES) * (_BAR_HEIGHT + _BAR_GAP)
    width = _LABEL_WIDTH + _BAR_WIDTH + 2 * _MARGIN
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width:.0f}" height="{height}" '
        f'viewBox="0 0 {width:.0f} {height}" font-family="{_FONT}">\n',
        f'<text x="{_MARGIN}" y="{_MARGIN + 10}" font-size="14" '
        f'font-weight="bold">Error-class prevalence '
        f"({report.annotated} annotated hard images)</text>\n",
    ]
    y = _MARGIN + 30
    for cls in ERROR_CLASSES:
        share = (
            float(report.percents[cls]) / 100.0 if report.annotated else 0.0
        )
        bar_w = round(_BAR_WIDTH * share, 2)
        parts.append(
            f'<text x="{_MARGIN}" y="{y + _BAR_HEIGHT / 2 + 4:.1f}" '
            f'font-size="12">{_esc(cls)}</text>\n'
        )
        parts.append(
            f'<rect x="{_MARGIN + _LABEL_WIDTH:.2f}" y="{y}" '
            f'width="{max(bar_w, 0.01):.2f}" height="{_BAR_HEIGHT}" fill="#1971c2">'
            f"<title>{_esc(cls)}: {report.counts[cls]} images</title></rect>\n"
        )
        parts.append(
            f'<text x="{_MARGIN + _LABEL_WIDTH + bar_w + 6:.2f}" '
            f'y="{y + _BAR_HEIGHT / 2 + 4:.1f}" font-size="11">'
            f"{format_percent(report.percents[cls] / 100, decimals=2)}%</text>\n"
        )
        y += _BAR_HEIGHT + _BAR_GAP
    parts.append("</svg>\n")
    return "".join(parts)


# ---------------------------------------------------------------------------
# Entry point

def emit_report(
    out_dir: Path | str,
    *,
    title: str = "Prediction analysis report",
    overlaps: Sequence[tuple[str, OverlapPartition]] = (),
    subset_tables: Sequence[tuple[str, SubsetCorrectnessTable]] = (),
    ensembles: Sequence[tuple[str, EnsembleResult]] = (),
    grids: Sequence[tuple[str, AccuracyGrid]] = (),
    prevalence_report: PrevalenceReport | None = None,
    disagreements: Mapping[str, tuple[str, ...]] | None = None,
    metadata: Mapping[str, str] | None = None,
) -> list[Path]:
    """Write report.json, tables.csv, and chart SVGs; returns written paths."""
    if not (overlaps or subset_tables or ensembles or grids or prevalence_report):
        raise ValueError("at least one report section required")
    out_dir = Path(out_dir)

    document: dict[str, Any] = {
        "format_version": 1,
        "title": title,
        "metadata": dict(metadata or {}),
        "overlap": [_overlap_section(lbl, p) for lbl, p in overlaps],
        "subset_correctness": [_subset_section(lbl, t) for lbl, t in subset_tables],
        "ensembles": [_ensemble_section(lbl, e) for lbl, e in ensembles],
        "grids": [_grid_section(lbl, g) for lbl, g in grids],
    }
    if prevalence_report is not None:
        document["prevalence"] = prevalence_payload(prevalence_report, disagreements)

    written: list[Path] = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        report_path = out_dir / REPORT_NAME
        report_path.write_text(
            json.dumps(document, indent=2) + "\n", encoding="utf-8"
        )
        written.append(report_path)

        tables_path = out_dir / TABLES_NAME
        tables_path.write_text(
            _tables_csv(overlaps, subset_tables, ensembles, grids, prevalence_report),
            encoding="utf-8",
            newline="",
        )
        written.append(tables_path)

        if overlaps:
            chart_path = out_dir / "chart-overlap.svg"
            chart_path.write_text(overlap_chart(overlaps), encoding="utf-8")
            written.append(chart_path)
        if prevalence_report is not None:
            chart_path = out_dir / "chart-prevalence.svg"
            chart_path.write_text(
                prevalence_chart(prevalence_report), encoding="utf-8"
            )
            written.append(chart_path)
    except OSError as exc:
        raise IoFailure(f"cannot write report to {out_dir}: {exc}") from exc
    return written


def resolved_annotation_payload(
    resolved: Mapping[str, ErrorAnnotation],
) -> dict[str, Any]:
    """JSON-ready map of image id to its winning annotation."""
    return {
        image_id: annotation_payload(resolved[image_id])
        for image_id in sorted(resolved)
    }
