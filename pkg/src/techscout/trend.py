"""Label-by-topic mapping, yearly trend statistics, and opportunity discovery.

Every (label, topic) cell gets a yearly count series over the analysis
window. A least-squares line is fitted to each series and an upward slope
is tested one-sided against Student t with T-2 degrees of freedom. Cells
that are both significant and quantitatively large enough are reported as
technology opportunities, ranked by t-value.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as scipy_stats

from .corpus import Corpus
from .labeling import ERROR_LABEL, DEFAULT_LABELS, LabelResult, LabelSet
from .topics import OUTLIER, TopicModel

LOGGER = logging.getLogger(__name__)

MARKER_STRONG = "†"  # dagger, one-sided p < 0.001
MARKER_SIGNIFICANT = "*"  # one-sided p < 0.05
MARKER_NONE = ""
MARKER_EMPTY = "--"  # all-zero series

P_STRONG = 0.001
P_SIGNIFICANT = 0.05


@dataclass(frozen=True)
class OlsFit:
    """Least-squares line through a yearly series indexed t = 1..T."""

    beta: float
    stderr: float
    tvalue: float
    intercept: float
    degenerate: bool  # perfect fit: zero residual variance


@dataclass(frozen=True)
class TrendStat:
    """Fitted trend and significance marker for one (label, topic) cell."""

    label: str
    topic: int
    count: int
    beta: float
    stderr: float
    tvalue: float
    marker: str
    degenerate: bool = False
    empty: bool = False  # series was all zeros

    @property
    def cell(self) -> tuple[str, int]:
        return (self.label, self.topic)


@dataclass(frozen=True)
class CrossMap:
    """Yearly count series for every (label, topic) cell over a window."""

    labels: tuple[str, ...]
    topics: tuple[int, ...]
    years: tuple[int, ...]
    series: dict[tuple[str, int], tuple[int, ...]]
    excluded: dict[str, int]

    def __post_init__(self) -> None:
        for cell, values in self.series.items():
            if len(values) != len(self.years):
                raise ValueError(f"series for {cell} does not span the window")

    def count(self, label: str, topic: int) -> int:
        return sum(self.series[(label, topic)])

    def cells(self) -> list[tuple[str, int]]:
        return [(label, topic) for label in self.labels for topic in self.topics]

    def total(self) -> int:
        return sum(sum(values) for values in self.series.values())

    def excluded_total(self) -> int:
        return sum(self.excluded.values())


def cross_map(
    label_results: Sequence[LabelResult],
    model: TopicModel,
    corpus: Corpus,
    window: tuple[int, int],
    label_set: LabelSet = DEFAULT_LABELS,
) -> CrossMap:
    """Tally documents into (label, topic) cells by filing year.

    Documents labeled with the fallback, marked as scorer errors, assigned
    to the outlier bucket, missing a topic assignment, or filed outside the
    window are excluded and tallied separately.
    """
    y_start, y_end = window
    if y_start > y_end:
        raise ValueError(f"window start {y_start} after end {y_end}")
    years = tuple(range(y_start, y_end + 1))
    topics = tuple(sorted(model.shares))
    labels = tuple(label_set.names)

    label_by_id = {r.application_id: r.label for r in label_results}
    topic_by_id = model.assignment_map()

    tallies = {
        (label, topic): [0] * len(years) for label in labels for topic in topics
    }
    excluded = {
        "fallback": 0,
        "scorer_error": 0,
        "unlabeled": 0,
        "outlier": 0,
        "unassigned": 0,
        "outside_window": 0,
    }
    for record in corpus:
        label = label_by_id.get(record.application_id)
        if label is None:
            excluded["unlabeled"] += 1
            continue
        if label == ERROR_LABEL:
            excluded["scorer_error"] += 1
            continue
        if label == label_set.fallback:
            excluded["fallback"] += 1
            continue
        topic = topic_by_id.get(record.application_id)
        if topic is None:
            excluded["unassigned"] += 1
            continue
        if topic == OUTLIER:
            excluded["outlier"] += 1
            continue
        year = record.filing_date.year
        if year < y_start or year > y_end:
            excluded["outside_window"] += 1
            continue
        tallies[(label, topic)][year - y_start] += 1

    series = {cell: tuple(values) for cell, values in tallies.items()}
    return CrossMap(labels, topics, years, series, excluded)


def ols_slope(series: Sequence[float]) -> OlsFit:
    """Least-squares slope of a series against time t = 1..T.

    stderr is the usual slope standard error sqrt((SSR/(T-2)) / Sxx). A
    perfect fit has stderr 0; its t-value is +/-inf by slope sign (0 for a
    flat series) and the fit is flagged degenerate.
    """
    s = np.asarray(series, dtype=float)
    T = s.size
    if T < 3:
        raise ValueError(f"need at least 3 points, got {T}")
    t = np.arange(1, T + 1, dtype=float)
    t_mean = t.mean()
    s_mean = s.mean()
    sxx = float(((t - t_mean) ** 2).sum())
    beta = float(((t - t_mean) * (s - s_mean)).sum() / sxx)
    intercept = float(s_mean - beta * t_mean)
    residuals = s - (intercept + beta * t)
    ssr = float((residuals**2).sum())
    variance = ssr / (T - 2) / sxx
    stderr = float(np.sqrt(variance))
    if stderr > 0.0:
        return OlsFit(beta, stderr, beta / stderr, intercept, degenerate=False)
    if beta > 0:
        tvalue = float("inf")
    elif beta < 0:
        tvalue = float("-inf")
    else:
        tvalue = 0.0
    return OlsFit(beta, 0.0, tvalue, intercept, degenerate=True)


def test_trend(stat, T: int, all_zero: bool = False) -> str:
    """Significance marker for an upward-trend test.

    One-sided test of H0: slope <= 0 against H1: slope > 0 under Student t
    with T-2 degrees of freedom. Dagger for p < 0.001, star for p < 0.05,
    empty string otherwise; an all-zero series renders as "--". A degenerate
    perfect fit with positive slope is the p -> 0 limit and gets the dagger.
    """
    if T < 3:
        raise ValueError(f"need at least 3 points, got {T}")
    if all_zero:
        return MARKER_EMPTY
    tvalue = stat.tvalue if hasattr(stat, "tvalue") else float(stat[2])
    p_value = float(scipy_stats.t.sf(tvalue, T - 2))
    if p_value < P_STRONG:
        return MARKER_STRONG
    if p_value < P_SIGNIFICANT:
        return MARKER_SIGNIFICANT
    return MARKER_NONE


def compute_trends(cross: CrossMap) -> list[TrendStat]:
    """One TrendStat per cell, label-major then topic order."""
    results: list[TrendStat] = []
    T = len(cross.years)
    for label, topic in cross.cells():
        values = cross.series[(label, topic)]
        total = sum(values)
        if total == 0:
            results.append(
                TrendStat(label, topic, 0, 0.0, 0.0, 0.0, MARKER_EMPTY, empty=True)
            )
            continue
        fit = ols_slope(values)
        marker = test_trend(fit, T)
        results.append(
            TrendStat(
                label,
                topic,
                total,
                fit.beta,
                fit.stderr,
                fit.tvalue,
                marker,
                degenerate=fit.degenerate,
            )
        )
    return results


@dataclass(frozen=True)
class Opportunity:
    label: str
    topic: int
    count: int
    beta: float
    tvalue: float
    marker: str


def default_min_count(cross: CrossMap) -> float:
    """Count floor encoding "quantitative growth": the median cell count."""
    counts = [cross.count(label, topic) for label, topic in cross.cells()]
    if not counts:
        return 0.0
    return float(np.median(counts))


def discover_opportunities(
    cross: CrossMap, trend_stats: Iterable[TrendStat], min_count: float | None = None
) -> list[Opportunity]:
    """Cells with a significant upward trend and enough volume.

    A cell qualifies when its marker is significant (star or dagger) and its
    total count reaches min_count (default: median cell count across the
    map). Results are ranked by t-value, descending.
    """
    if min_count is None:
        min_count = default_min_count(cross)
        LOGGER.info("opportunity count floor (median cell count): %r", min_count)
    label_order = {label: i for i, label in enumerate(cross.labels)}
    picked = [
        stat
        for stat in trend_stats
        if stat.marker in (MARKER_SIGNIFICANT, MARKER_STRONG) and stat.count >= min_count
    ]
    picked.sort(key=lambda s: (-s.tvalue, label_order.get(s.label, len(label_order)), s.topic))
    return [
        Opportunity(s.label, s.topic, s.count, s.beta, s.tvalue, s.marker) for s in picked
    ]


def write_matrix_csv(cross: CrossMap, path: str | Path) -> None:
    """Counts matrix: one row per label, one column per topic."""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["label"] + [f"T{t}" for t in cross.topics])
        for label in cross.labels:
            writer.writerow([label] + [cross.count(label, t) for t in cross.topics])


def write_series_csv(cross: CrossMap, path: str | Path) -> None:
    """Long-form plot series for non-empty cells: label,topic,year,count."""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["label", "topic", "year", "count"])
        for label, topic in cross.cells():
            values = cross.series[(label, topic)]
            if sum(values) == 0:
                continue
            for year, count in zip(cross.years, values):
                writer.writerow([label, topic, year, count])


def write_trend_csv(trend_stats: Sequence[TrendStat], path: str | Path) -> None:
    """Trend table: label,topic,count,beta,stderr,tvalue,marker.

    All-zero cells render their numeric columns as "--".
    """
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["label", "topic", "count", "beta", "stderr", "tvalue", "marker"])
        for stat in trend_stats:
            if stat.empty:
                writer.writerow([stat.label, stat.topic, 0, "--", "--", "--", MARKER_EMPTY])
            else:
                writer.writerow(
                    [
                        stat.label,
                        stat.topic,
                        stat.count,
                        repr(stat.beta),
                        repr(stat.stderr),
                        repr(stat.tvalue),
                        stat.marker,
                    ]
                )


def write_opportunities_csv(opportunities: Sequence[Opportunity], path: str | Path) -> None:
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["rank", "label", "topic", "count", "beta", "tvalue", "marker"])
        for rank, opp in enumerate(opportunities, start=1):
            writer.writerow(
                [rank, opp.label, opp.topic, opp.count, repr(opp.beta), repr(opp.tvalue), opp.marker]
            )


def save_cross_map(cross: CrossMap, path: str | Path) -> None:
    """Persist the full map (series, window, exclusions) as JSON."""
    import json

    payload = {
        "labels": list(cross.labels),
        "topics": list(cross.topics),
        "years": list(cross.years),
        "series": {
            f"{label}|{topic}": list(cross.series[(label, topic)])
            for label, topic in cross.cells()
        },
        "excluded": dict(cross.excluded),
    }
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")


def load_cross_map(path: str | Path) -> CrossMap:
    import json

    with Path(path).open("r", encoding="utf-8") as handle:
        payload = json.load(handle)
    series: dict[tuple[str, int], tuple[int, ...]] = {}
    for key, values in payload["series"].items():
        label, _, topic = key.rpartition("|")
        series[(label, int(topic))] = tuple(int(v) for v in values)
    return CrossMap(
        labels=tuple(payload["labels"]),
        topics=tuple(int(t) for t in payload["topics"]),
        years=tuple(int(y) for y in payload["years"]),
        series=series,
        excluded={k: int(v) for k, v in payload["excluded"].items()},
    )
