"""Turn classifier probability vectors into category labels.

A scorer is any object with ``score(doc_key, text) -> sequence of floats``.
Raw scores that already look like a probability vector (all entries in [0,1],
summing to 1 within 1e-6) are used as-is; anything else is treated as logits
and passed through a numerically safe softmax. Documents whose best
probability stays below the gamma threshold receive the fallback label.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .corpus import Corpus
from .text import tokenize

LOGGER = logging.getLogger(__name__)

# Distinguished marker for documents whose scorer call failed; such rows are
# excluded from distributions, topic modeling, and trend mapping.
ERROR_LABEL = "__scorer_error__"

_PROB_SUM_TOL = 1e-6


class ScorerError(Exception):
    """Raised by scorers that cannot produce a score vector for a document."""


@dataclass(frozen=True)
class LabelSet:
    """Ordered category names plus the out-of-set fallback name."""

    names: tuple[str, ...]
    fallback: str = "not_AI"

    def __post_init__(self) -> None:
        if len(self.names) != len(set(self.names)):
            raise ValueError("label names must be unique")
        if self.fallback in self.names:
            raise ValueError("fallback label must not appear in names")

    def all_labels(self) -> tuple[str, ...]:
        return self.names + (self.fallback,)


DEFAULT_LABELS = LabelSet(("Hardware", "ML", "NLP", "Speech", "Vision"), "not_AI")


@dataclass(frozen=True)
class LabelResult:
    """Probability vector and assigned label for one document."""

    application_id: str
    probs: tuple[float, ...]
    label: str
    gamma: float

    @property
    def max_prob(self) -> float | None:
        return max(self.probs) if self.probs else None

    @property
    def failed(self) -> bool:
        return self.label == ERROR_LABEL


class Scorer(Protocol):
    def score(self, doc_key: str, text: str) -> Sequence[float]: ...


def softmax(logits: Sequence[float]) -> np.ndarray:
    """Normalized exponentials with max-subtraction for overflow safety."""
    z = np.asarray(logits, dtype=float)
    if z.size == 0:
        raise ValueError("softmax of an empty vector")
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax requires finite inputs")
    shifted = z - z.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def as_probabilities(scores: Sequence[float]) -> np.ndarray:
    """Interpret raw scorer output, applying softmax unless already normalized."""
    z = np.asarray(scores, dtype=float)
    if z.size == 0:
        raise ValueError("empty score vector")
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite score vector")
    if np.all(z >= 0.0) and np.all(z <= 1.0) and abs(float(z.sum()) - 1.0) <= _PROB_SUM_TOL:
        return z
    return softmax(z)


def assign_label(probs: Sequence[float], labels: LabelSet, gamma: float) -> str:
    """Best label when its probability clears gamma, else the fallback.

    Ties break to the lowest index.
    """
    p = np.asarray(probs, dtype=float)
    if p.size != len(labels.names):
        raise ValueError(
            f"probability vector length {p.size} != number of labels {len(labels.names)}"
        )
    best = int(np.argmax(p))
    if p[best] >= gamma:
        return labels.names[best]
    return labels.fallback


def classify_corpus(
    corpus: Corpus,
    scorer: Scorer,
    labels: LabelSet = DEFAULT_LABELS,
    gamma: float = 0.5,
) -> list[LabelResult]:
    """One LabelResult per record, in corpus order.

    A scorer failure marks that document with ERROR_LABEL instead of aborting
    the run; callers count failures from the returned list.
    """
    results: list[LabelResult] = []
    failures = 0
    for record in corpus:
        try:
            raw = scorer.score(record.application_id, record.text)
            probs = as_probabilities(raw)
            if probs.size != len(labels.names):
                raise ScorerError(
                    f"scorer returned {probs.size} values, expected {len(labels.names)}"
                )
            label = assign_label(probs, labels, gamma)
            results.append(
                LabelResult(record.application_id, tuple(float(p) for p in probs), label, gamma)
            )
        except Exception as exc:
            failures += 1
            LOGGER.warning("scorer failed for %s: %s", record.application_id, exc)
            results.append(LabelResult(record.application_id, (), ERROR_LABEL, gamma))
    if failures:
        LOGGER.warning("classification: %d of %d documents failed scoring", failures, len(corpus))
    return results


@dataclass(frozen=True)
class DistributionRow:
    label: str
    count: int
    rate: float  # raw fraction of total
    percent: float  # display value, rounded to 2 decimals


def distribution_from_counts(counts: Mapping[str, int]) -> list[DistributionRow]:
    """Counts to rate table, preserving the mapping's order."""
    total = sum(counts.values())
    rows = []
    for label, count in counts.items():
        rate = count / total if total else 0.0
        rows.append(DistributionRow(label, count, rate, round(100.0 * rate, 2)))
    return rows


def label_distribution(
    results: Iterable[LabelResult], labels: LabelSet | None = None
) -> list[DistributionRow]:
    """Label counts and rates over successfully scored documents.

    With a LabelSet, rows follow its order (fallback last) and include zero
    counts; otherwise labels appear in first-seen order.
    """
    counts: dict[str, int] = {}
    if labels is not None:
        counts = {name: 0 for name in labels.all_labels()}
    for result in results:
        if result.failed:
            continue
        counts[result.label] = counts.get(result.label, 0) + 1
    return distribution_from_counts(counts)


class StoredLogitsScorer:
    """Scorer backed by a JSONL fixture of {application_id, logits} rows."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._table: dict[str, tuple[float, ...]] = {}
        with self.path.open("r", encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                row = json.loads(line)
                self._table[str(row["application_id"])] = tuple(
                    float(v) for v in row["logits"]
                )

    def score(self, doc_key: str, text: str) -> Sequence[float]:
        try:
            return self._table[doc_key]
        except KeyError:
            raise ScorerError(f"no stored logits for {doc_key!r}")


class KeywordScorer:
    """Deterministic rule scorer: logit per label = keyword hit count in the text."""

    def __init__(self, rules: Mapping[str, Sequence[str]], labels: LabelSet = DEFAULT_LABELS):
        self.labels = labels
        self._keywords = {
            name: frozenset(k.lower() for k in rules.get(name, ())) for name in labels.names
        }

    def score(self, doc_key: str, text: str) -> Sequence[float]:
        tokens = tokenize(text)
        logits = []
        for name in self.labels.names:
            keywords = self._keywords[name]
            logits.append(float(sum(1 for t in tokens if t in keywords)))
        return logits


def write_labels_csv(results: Sequence[LabelResult], path: str | Path) -> None:
    """Label output contract: application_id,label,max_prob."""
    import csv

    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["application_id", "label", "max_prob"])
        for r in results:
            writer.writerow([r.application_id, r.label, repr(r.max_prob) if r.probs else ""])


def read_labels_csv(path: str | Path) -> list[tuple[str, str, float | None]]:
    """Read back the label output contract."""
    import csv

    rows: list[tuple[str, str, float | None]] = []
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        for row in csv.DictReader(handle):
            prob = float(row["max_prob"]) if row["max_prob"] else None
            rows.append((row["application_id"], row["label"], prob))
    return rows
