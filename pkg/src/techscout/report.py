"""Render human-readable report tables and figures from persisted artifacts.

This stage is pure formatting: it reads the delimited artifacts written by
earlier stages and regenerates a markdown report plus rendered figures.
Nothing is recomputed, so the report can be rebuilt at any time from the
artifact directory alone.
"""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from pathlib import Path
from typing import TYPE_CHECKING

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

if TYPE_CHECKING:
    from .pipeline import Workspace

LOGGER = logging.getLogger(__name__)

FIGURE_DPI = 100
FIGURE_SIZE = (8.0, 4.5)


def _read_rows(path: Path) -> list[dict[str, str]]:
    with path.open("r", encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def _fmt(value: str, decimals: int = 3) -> str:
    if value == "--":
        return "--"
    return f"{float(value):.{decimals}f}"


def _markdown_table(headers: list[str], rows: list[list[str]]) -> str:
    lines = ["| " + " | ".join(headers) + " |"]
    lines.append("|" + "|".join(" --- " for _ in headers) + "|")
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines)


def render_report(ws: "Workspace") -> list[Path]:
    """Write report.md and figures; returns the list of files written."""
    written: list[Path] = []
    sections: list[str] = ["# Technology opportunity report", ""]

    distribution = _read_rows(ws.label_distribution_file)
    sections.append("## Label distribution")
    sections.append("")
    sections.append(
        _markdown_table(
            ["Label", "Count", "Rate (%)"],
            [[r["label"], r["count"], r["rate"]] for r in distribution],
        )
    )
    sections.append("")

    shares = _read_rows(ws.topic_shares_file)
    names = {}
    if ws.names_file.exists():
        names = {r["topic"]: r["name"] for r in _read_rows(ws.names_file)}
    sections.append("## Topic shares")
    sections.append("")
    sections.append(
        _markdown_table(
            ["Topic", "Name", "Count", "Rate (%)"],
            [
                [f"T{r['topic']}", names.get(r["topic"], ""), r["count"], r["share"]]
                for r in shares
            ],
        )
    )
    sections.append("")

    if ws.topic_keywords_file.exists():
        keywords = _read_rows(ws.topic_keywords_file)
        by_topic: dict[str, list[str]] = defaultdict(list)
        for row in keywords:
            by_topic[row["topic"]].append(row["term"])
        sections.append("## Topic keywords")
        sections.append("")
        sections.append(
            _markdown_table(
                ["Topic", "Top keywords"],
                [[f"T{t}", ", ".join(terms[:10])] for t, terms in sorted(by_topic.items())],
            )
        )
        sections.append("")

    trend_rows = _read_rows(ws.trend_stats_file)
    sections.append("## Trend statistics")
    sections.append("")
    table_rows = []
    for row in trend_rows:
        tvalue = row["tvalue"]
        marker = row["marker"]
        if tvalue == "--":
            shown = "--"
        else:
            shown = _fmt(tvalue) + (marker if marker != "--" else "")
        table_rows.append(
            [
                row["label"],
                f"T{row['topic']}",
                row["count"],
                _fmt(row["beta"]),
                _fmt(row["stderr"]),
                shown,
            ]
        )
    sections.append(
        _markdown_table(
            ["Label", "Topic", "Count", "Coefficient", "Std.Err", "T-value"], table_rows
        )
    )
    sections.append("")

    if ws.opportunities_file.exists():
        opportunities = _read_rows(ws.opportunities_file)
        sections.append("## Technology opportunities")
        sections.append("")
        if opportunities:
            sections.append(
                _markdown_table(
                    ["Rank", "Label", "Topic", "Count", "Slope", "T-value"],
                    [
                        [
                            r["rank"],
                            r["label"],
                            f"T{r['topic']}",
                            r["count"],
                            _fmt(r["beta"]),
                            _fmt(r["tvalue"]) + r["marker"],
                        ]
                        for r in opportunities
                    ],
                )
            )
        else:
            sections.append("No cells met the significance and volume thresholds.")
        sections.append("")

    figures = _render_figures(ws, distribution, shares)
    if figures:
        sections.append("## Figures")
        sections.append("")
        for figure in figures:
            relative = figure.relative_to(ws.artifacts)
            sections.append(f"![{figure.stem}]({relative})")
        sections.append("")

    ws.report_file.parent.mkdir(parents=True, exist_ok=True)
    ws.report_file.write_text("\n".join(sections), encoding="utf-8")
    written.append(ws.report_file)
    written.extend(figures)
    return written


def _render_figures(ws: "Workspace", distribution, shares) -> list[Path]:
    ws.figures_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if distribution:
        path = ws.figures_dir / "label_distribution.png"
        fig, ax = plt.subplots(figsize=FIGURE_SIZE, dpi=FIGURE_DPI)
        labels = [r["label"] for r in distribution]
        counts = [int(r["count"]) for r in distribution]
        ax.bar(labels, counts, color="#4878a8")
        ax.set_ylabel("Documents")
        ax.set_title("Label distribution")
        fig.tight_layout()
        fig.savefig(path, dpi=FIGURE_DPI)
        plt.close(fig)
        written.append(path)

    if shares:
        path = ws.figures_dir / "topic_shares.png"
        fig, ax = plt.subplots(figsize=FIGURE_SIZE, dpi=FIGURE_DPI)
        topics = [f"T{r['topic']}" for r in shares]
        values = [float(r["share"]) for r in shares]
        ax.bar(topics, values, color="#6a9a58")
        ax.set_ylabel("Share (%)")
        ax.set_title("Topic shares")
        fig.tight_layout()
        fig.savefig(path, dpi=FIGURE_DPI)
        plt.close(fig)
        written.append(path)

    if ws.series_file.exists():
        series_rows = _read_rows(ws.series_file)
        if series_rows:
            path = ws.figures_dir / "trend_series.png"
            by_cell: dict[tuple[str, str], list[tuple[int, int]]] = defaultdict(list)
            for row in series_rows:
                by_cell[(row["label"], row["topic"])].append(
                    (int(row["year"]), int(row["count"]))
                )
            fig, ax = plt.subplots(figsize=FIGURE_SIZE, dpi=FIGURE_DPI)
            for (label, topic), points in sorted(by_cell.items()):
                points.sort()
                years = [y for y, _ in points]
                counts = [c for _, c in points]
                ax.plot(years, counts, marker="o", label=f"{label} x T{topic}")
            ax.set_xlabel("Filing year")
            ax.set_ylabel("Patents")
            ax.set_title("Yearly counts per label x topic")
            if len(by_cell) <= 12:
                ax.legend(fontsize=8)
            fig.tight_layout()
            fig.savefig(path, dpi=FIGURE_DPI)
            plt.close(fig)
            written.append(path)

    return written
