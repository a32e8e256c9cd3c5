"""Acceptance gate: eight checks, one recorded pass/fail line each.

Criteria 1-3 pin the implementation to the published reference numbers
(reference_stats.py); 4-5 are property suites against independent oracles;
6-7 exercise the full pipeline on the planted corpus; 8 pins the prompt
renderings to golden files. Each test records exactly one verdict line via
record_acceptance, echoed in the terminal summary.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

import reference_stats
from reference_stats import SERIES_LENGTH, iter_cells

from techscout.labeling import distribution_from_counts, softmax
from techscout.naming import (
    FEW_SHOT_EXEMPLARS,
    KEYWORD_LIST_PLACEHOLDER,
    render_few_shot_prompt,
    render_naming_prompt,
)
from techscout.topics import load_model
from techscout.trend import ols_slope
from techscout.trend import test_trend as significance_marker

from conftest import (
    DATA_DIR,
    GROUP_SHARES,
    GROWING_CELL,
    VOCABULARIES,
    planted_run_config,
    record_acceptance,
)


def _artifact_bytes(out_dir: Path) -> dict[str, bytes]:
    artifacts = Path(out_dir) / "artifacts"
    return {
        str(path.relative_to(artifacts)): path.read_bytes()
        for path in sorted(artifacts.rglob("*"))
        if path.is_file()
    }


def test_criterion_1_category_rates():
    rows = distribution_from_counts(reference_stats.CATEGORY_COUNTS)
    failures = [
        f"{row.label}: {row.percent:.2f} vs {reference_stats.CATEGORY_RATES[row.label]:.2f}"
        for row in rows
        if abs(row.percent - reference_stats.CATEGORY_RATES[row.label]) > 0.01 + 1e-12
    ]
    passed = not failures
    detail = f"{len(rows)} categories within ±0.01" if passed else "; ".join(failures)
    record_acceptance(1, "category rate reproduction", passed, detail)
    assert passed, failures


def test_criterion_2_statistic_ratios():
    failures = []
    checked = 0
    for window in ("A", "B"):
        for label, topic, cell in iter_cells(window):
            checked += 1
            ratio = cell.coefficient / cell.stderr
            delta = abs(ratio - cell.tvalue)
            if delta > 0.015:
                failures.append(
                    f"{window}/{label}/T{topic}: coefficient/stderr = {ratio:.5f} "
                    f"vs printed {cell.tvalue} (delta {delta:.5f})"
                )
    passed = not failures
    detail = (
        f"{checked} cells within ±0.015"
        if passed
        else f"{len(failures)} of {checked} cells off: " + "; ".join(failures)
    )
    record_acceptance(2, "trend statistic ratio reproduction", passed, detail)
    assert passed, failures


def test_criterion_3_markers():
    failures = []
    checked = 0
    for window in ("A", "B"):
        for label, topic, cell in iter_cells(window):
            if (window, label, topic) in reference_stats.MARKER_EXCEPTIONS:
                continue
            checked += 1
            got = significance_marker(
                (cell.coefficient, cell.stderr, cell.tvalue), SERIES_LENGTH
            )
            if got != cell.marker:
                failures.append(
                    f"{window}/{label}/T{topic}: got {got!r}, printed {cell.marker!r}"
                )
    # The two strong markers named by the criterion must come out as daggers.
    for window, label, topic, tvalue in (
        ("B", "Hardware", 2, 17.216),
        ("B", "Speech", 2, 21.824),
    ):
        if significance_marker((1.0, 0.1, tvalue), SERIES_LENGTH) != "†":
            failures.append(f"{window}/{label}/T{topic}: t={tvalue} did not earn †")
    passed = not failures
    detail = (
        f"{checked} cells match (1 documented exception skipped)"
        if passed
        else "; ".join(failures)
    )
    record_acceptance(3, "significance marker reproduction", passed, detail)
    assert passed, failures


def test_criterion_4_ols_oracle():
    rng = np.random.default_rng(12345)
    trials = 1000
    max_dbeta = 0.0
    max_dstderr = 0.0
    t = np.arange(1, 6, dtype=float)
    design = np.column_stack([np.ones(5), t])
    sxx = float(((t - t.mean()) ** 2).sum())
    for _ in range(trials):
        series = rng.integers(0, 40, size=5).astype(float)
        fit = ols_slope(series)
        # Independent route: solve the normal equations directly.
        coef = np.linalg.solve(design.T @ design, design.T @ series)
        resid = series - design @ coef
        ssr = float(resid @ resid)
        stderr = math.sqrt(max(ssr, 0.0) / 3.0 / sxx)
        max_dbeta = max(max_dbeta, abs(fit.beta - float(coef[1])))
        max_dstderr = max(max_dstderr, abs(fit.stderr - stderr))
    passed = max_dbeta < 1e-6 and max_dstderr < 1e-6
    detail = (
        f"{trials} series, max |Δbeta| {max_dbeta:.2e}, max |Δstderr| {max_dstderr:.2e}"
    )
    record_acceptance(4, "OLS oracle equivalence", passed, detail)
    assert passed, detail


def test_criterion_5_softmax_properties():
    rng = np.random.default_rng(999)
    trials = 10_000
    worst_shift = 0.0
    worst_sum = 0.0
    argmax_breaks = 0
    for _ in range(trials):
        dim = int(rng.integers(2, 9))
        z = rng.normal(0.0, 5.0, size=dim)
        p = softmax(z)
        shift = float(rng.normal(0.0, 10.0))
        worst_shift = max(worst_shift, float(np.max(np.abs(p - softmax(z + shift)))))
        worst_sum = max(worst_sum, abs(float(p.sum()) - 1.0))
        if int(np.argmax(p)) != int(np.argmax(z)):
            argmax_breaks += 1
    passed = worst_shift < 1e-12 and worst_sum < 1e-9 and argmax_breaks == 0
    detail = (
        f"{trials} vectors, max shift delta {worst_shift:.2e}, "
        f"max sum error {worst_sum:.2e}, argmax breaks {argmax_breaks}"
    )
    record_acceptance(5, "softmax property suite", passed, detail)
    assert passed, detail


def test_criterion_6_planted_end_to_end(planted_dataset, planted_run):
    failures = []
    out_dir = planted_run["out_dir"]
    model = load_model(Path(out_dir) / "artifacts" / "topic_model.json")
    topics = sorted(model.shares)
    if len(topics) < 3:
        failures.append(f"only {len(topics)} topics extracted")

    group_of = planted_dataset.group_of()
    vocab_sets = {group: set(words) for group, words in VOCABULARIES.items()}
    majority_group = {}
    for tid in topics:
        members = [
            group_of[doc_id]
            for doc_id, assigned in zip(model.doc_ids, model.assignments)
            if assigned == tid
        ]
        group = max(set(members), key=members.count)
        majority_group[tid] = group
        top_term = model.keywords[tid][0][0] if model.keywords.get(tid) else None
        if top_term not in vocab_sets[group]:
            failures.append(
                f"topic {tid}: top keyword {top_term!r} not in group {group} vocabulary"
            )
        expected_share = GROUP_SHARES[group]
        if abs(model.shares[tid] - expected_share) > 2.0:
            failures.append(
                f"topic {tid}: share {model.shares[tid]:.2f} vs planted "
                f"{expected_share:.2f} (group {group})"
            )

    with (Path(out_dir) / "artifacts" / "opportunities.csv").open(
        "r", encoding="utf-8", newline=""
    ) as handle:
        opportunity_cells = [
            (row["label"], majority_group.get(int(row["topic"]), "?"))
            for row in csv.DictReader(handle)
        ]
    if opportunity_cells != [GROWING_CELL]:
        failures.append(
            f"opportunities {opportunity_cells} != planted [{GROWING_CELL}]"
        )

    passed = not failures
    detail = (
        f"{len(topics)} topics, shares within ±2, opportunity = "
        f"{GROWING_CELL[0]} x group {GROWING_CELL[1]}"
        if passed
        else "; ".join(failures)
    )
    record_acceptance(6, "planted end-to-end recovery", passed, detail)
    assert passed, failures


def test_criterion_7_determinism(planted_dataset, planted_run, tmp_path_factory, monkeypatch):
    from techscout.config import PROVIDER_URL_ENV
    from techscout.pipeline import run_pipeline

    monkeypatch.delenv(PROVIDER_URL_ENV, raising=False)
    rerun_dir = tmp_path_factory.mktemp("planted-rerun")
    run_pipeline(planted_run_config(planted_dataset, rerun_dir))
    first = _artifact_bytes(planted_run["out_dir"])
    second = _artifact_bytes(rerun_dir)
    missing = sorted(set(first) ^ set(second))
    different = sorted(name for name in set(first) & set(second) if first[name] != second[name])
    passed = not missing and not different
    detail = (
        f"{len(first)} artifact files byte-identical across runs"
        if passed
        else f"name mismatches {missing}, content mismatches {different}"
    )
    record_acceptance(7, "byte-identical reruns", passed, detail)
    assert passed, detail


def test_criterion_8_prompt_fidelity():
    failures = []
    script = render_few_shot_prompt()
    system_text = script.messages[0][1] + "\n"
    user_text = script.messages[1][1] + "\n"
    if system_text != (DATA_DIR / "few_shot_system.txt").read_text(encoding="utf-8"):
        failures.append("system message drifted from golden")
    if user_text != (DATA_DIR / "few_shot_user.txt").read_text(encoding="utf-8"):
        failures.append("few-shot user message drifted from golden")
    if not all(len(keywords) == 20 for keywords, _ in FEW_SHOT_EXEMPLARS):
        failures.append("an exemplar keyword list is not 20 terms")

    template = (DATA_DIR / "naming_prompt_template.txt").read_text(encoding="utf-8")
    if KEYWORD_LIST_PLACEHOLDER not in template:
        failures.append("golden template lost its substitution point")
    rendered = render_naming_prompt(["alpha", "beta", "gamma"]).messages[0][1] + "\n"
    expected = template.replace(KEYWORD_LIST_PLACEHOLDER, "alpha, beta, gamma")
    if rendered != expected:
        failures.append("naming prompt substitution drifted from golden")

    passed = not failures
    detail = "3 goldens match, substitution verified" if passed else "; ".join(failures)
    record_acceptance(8, "prompt fidelity", passed, detail)
    assert passed, failures
