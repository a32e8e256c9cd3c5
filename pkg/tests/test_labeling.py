"""Softmax, threshold labeling, scorers, and the label distribution table."""

from __future__ import annotations

import json
from datetime import date

import numpy as np
import pytest

from techscout.corpus import Corpus, PatentRecord
from techscout.labeling import (
    ERROR_LABEL,
    DEFAULT_LABELS,
    KeywordScorer,
    LabelResult,
    LabelSet,
    StoredLogitsScorer,
    as_probabilities,
    assign_label,
    classify_corpus,
    distribution_from_counts,
    label_distribution,
    read_labels_csv,
    softmax,
    write_labels_csv,
)

from reference_stats import CATEGORY_COUNTS, CATEGORY_RATES


def make_corpus(texts: dict[str, str]) -> Corpus:
    records = tuple(
        PatentRecord(app_id, f"P-{app_id}", date(2020, 1, 1), None, text, "")
        for app_id, text in texts.items()
    )
    return Corpus(records)


def test_softmax_frozen_oracle():
    # Expected values computed once with extended-precision arithmetic.
    expected = (0.090031, 0.244728, 0.665241)
    result = softmax([1.0, 2.0, 3.0])
    assert result == pytest.approx(expected, abs=1e-6)


def test_softmax_properties_small():
    rng = np.random.default_rng(3)
    for _ in range(200):
        z = rng.normal(0, 5, size=rng.integers(2, 8))
        p = softmax(z)
        assert abs(p.sum() - 1.0) <= 1e-9
        assert np.all(p > 0) and np.all(p < 1)
        assert int(np.argmax(p)) == int(np.argmax(z))
        shifted = softmax(z + 123.456)
        assert np.max(np.abs(p - shifted)) < 1e-12


def test_softmax_handles_large_magnitudes():
    p = softmax([1000.0, 1001.0, 1002.0])
    assert abs(p.sum() - 1.0) <= 1e-9
    assert int(np.argmax(p)) == 2


@pytest.mark.parametrize("bad", [[], [1.0, float("nan")], [1.0, float("inf")]])
def test_softmax_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        softmax(bad)


def test_as_probabilities_passthrough_when_normalized():
    probs = [0.2, 0.3, 0.5]
    result = as_probabilities(probs)
    assert result.tolist() == probs  # exact passthrough, no softmax


def test_as_probabilities_applies_softmax_otherwise():
    # Values in [0,1] but not summing to 1 are logits, not probabilities.
    result = as_probabilities([0.2, 0.3, 0.4])
    assert result.tolist() != [0.2, 0.3, 0.4]
    assert abs(result.sum() - 1.0) <= 1e-9
    # Negative values must go through softmax too.
    result = as_probabilities([-1.0, 0.0, 1.0])
    assert abs(result.sum() - 1.0) <= 1e-9


def test_assign_label_threshold_and_fallback():
    labels = LabelSet(("x", "y"), "other")
    assert assign_label([0.7, 0.3], labels, 0.5) == "x"
    assert assign_label([0.45, 0.55], labels, 0.6) == "other"
    # Exactly at threshold counts as assigned.
    assert assign_label([0.5, 0.5], labels, 0.5) == "x"


def test_assign_label_tie_breaks_to_lowest_index():
    labels = LabelSet(("a", "b", "c"), "none")
    assert assign_label([0.4, 0.4, 0.2], labels, 0.3) == "a"


def test_assign_label_length_mismatch():
    with pytest.raises(ValueError):
        assign_label([0.5, 0.5], DEFAULT_LABELS, 0.5)


def test_label_set_invariants():
    with pytest.raises(ValueError):
        LabelSet(("a", "a"), "f")
    with pytest.raises(ValueError):
        LabelSet(("a", "b"), "a")


def test_classify_corpus_with_stored_logits(tmp_path):
    logits = tmp_path / "logits.jsonl"
    rows = [
        {"application_id": "D1", "logits": [9.0, 0.0, 0.0, 0.0, 0.0]},
        {"application_id": "D2", "logits": [0.0, 0.0, 0.0, 0.0, 9.0]},
        {"application_id": "D3", "logits": [0.1, 0.2, 0.1, 0.2, 0.1]},
    ]
    logits.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    corpus = make_corpus({"D1": "one", "D2": "two", "D3": "three"})
    results = classify_corpus(corpus, StoredLogitsScorer(logits))
    by_id = {r.application_id: r for r in results}
    assert by_id["D1"].label == "Hardware"
    assert by_id["D2"].label == "Vision"
    # Near-uniform probabilities stay under gamma 0.5 -> fallback.
    assert by_id["D3"].label == "not_AI"
    assert all(abs(sum(r.probs) - 1.0) <= 1e-9 for r in results)


def test_classify_marks_scorer_failures_and_continues(tmp_path):
    logits = tmp_path / "logits.jsonl"
    logits.write_text(
        json.dumps({"application_id": "D1", "logits": [9, 0, 0, 0, 0]}) + "\n"
    )
    corpus = make_corpus({"D1": "one", "D2": "missing"})
    results = classify_corpus(corpus, StoredLogitsScorer(logits))
    assert results[0].label == "Hardware"
    assert results[1].label == ERROR_LABEL
    assert results[1].failed and results[1].probs == ()


def test_keyword_scorer_counts_hits():
    labels = LabelSet(("cats", "dogs"), "neither")
    scorer = KeywordScorer({"cats": ["cat", "kitten"], "dogs": ["dog"]}, labels)
    assert list(scorer.score("x", "A kitten and a cat met a dog")) == [2.0, 1.0]


def test_distribution_from_counts_hand_case():
    rows = distribution_from_counts({"a": 1, "b": 3})
    assert [(r.label, r.percent) for r in rows] == [("a", 25.0), ("b", 75.0)]


def test_distribution_reproduces_reference_rates():
    rows = distribution_from_counts(CATEGORY_COUNTS)
    for row in rows:
        assert row.percent == pytest.approx(CATEGORY_RATES[row.label], abs=0.01)


def test_label_distribution_excludes_failures_and_orders_by_label_set():
    labels = LabelSet(("x", "y"), "other")
    results = [
        LabelResult("1", (0.9, 0.1), "x", 0.5),
        LabelResult("2", (), ERROR_LABEL, 0.5),
        LabelResult("3", (0.2, 0.3), "other", 0.5),
        LabelResult("4", (0.1, 0.9), "y", 0.5),
        LabelResult("5", (0.8, 0.2), "x", 0.5),
    ]
    rows = label_distribution(results, labels)
    assert [(r.label, r.count) for r in rows] == [("x", 2), ("y", 1), ("other", 1)]
    assert sum(r.count for r in rows) == 4  # failure excluded


def test_labels_csv_round_trip(tmp_path):
    results = [
        LabelResult("D1", (0.7, 0.3), "x", 0.5),
        LabelResult("D2", (), ERROR_LABEL, 0.5),
    ]
    path = tmp_path / "labels.csv"
    write_labels_csv(results, path)
    header = path.read_text().splitlines()[0]
    assert header == "application_id,label,max_prob"
    rows = read_labels_csv(path)
    assert rows[0] == ("D1", "x", 0.7)
    assert rows[1] == ("D2", ERROR_LABEL, None)
