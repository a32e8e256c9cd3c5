"""Stage orchestration: each stage reads the previous stage's artifacts.

Stages communicate only through files under <out>/artifacts/, which makes
partial reruns cheap and keeps the artifact directory byte-reproducible.
Timings and other run metadata live in run_report.json next to (not inside)
the artifact directory, so wall-clock noise never touches the reproducible
surface.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

from . import corpus as corpus_mod
from . import report as report_mod
from .config import RunConfig
from .embedding import HashedEmbeddingProvider, HttpEmbeddingProvider
from .labeling import (
    ERROR_LABEL,
    KeywordScorer,
    LabelResult,
    LabelSet,
    StoredLogitsScorer,
    classify_corpus,
    label_distribution,
    read_labels_csv,
    write_labels_csv,
)
from .naming import HttpChatProvider, name_topics, write_names_csv, write_transcripts
from .topics import fit_topic_model, load_model, save_model, write_keywords_csv, write_shares_csv
from .trend import (
    compute_trends,
    cross_map,
    discover_opportunities,
    load_cross_map,
    save_cross_map,
    write_matrix_csv,
    write_opportunities_csv,
    write_series_csv,
    write_trend_csv,
)

LOGGER = logging.getLogger(__name__)

STAGES = ("ingest", "label", "topics", "map", "trend", "name", "report")


class StageError(Exception):
    """A stage could not run; the message names the stage and the cause."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage '{stage}': {message}")


@dataclass(frozen=True)
class Workspace:
    """Well-known artifact locations under one output directory."""

    out_dir: Path

    @property
    def artifacts(self) -> Path:
        return self.out_dir / "artifacts"

    @property
    def corpus_file(self) -> Path:
        return self.artifacts / "corpus.jsonl"

    @property
    def rejects_file(self) -> Path:
        return self.artifacts / "rejects.jsonl"

    @property
    def labels_file(self) -> Path:
        return self.artifacts / "labels.csv"

    @property
    def label_distribution_file(self) -> Path:
        return self.artifacts / "label_distribution.csv"

    @property
    def topic_model_file(self) -> Path:
        return self.artifacts / "topic_model.json"

    @property
    def topic_keywords_file(self) -> Path:
        return self.artifacts / "topic_keywords.csv"

    @property
    def topic_shares_file(self) -> Path:
        return self.artifacts / "topic_shares.csv"

    @property
    def cross_map_file(self) -> Path:
        return self.artifacts / "cross_map.json"

    @property
    def matrix_file(self) -> Path:
        return self.artifacts / "cross_map.csv"

    @property
    def series_file(self) -> Path:
        return self.artifacts / "plot_series.csv"

    @property
    def trend_stats_file(self) -> Path:
        return self.artifacts / "trend_stats.csv"

    @property
    def opportunities_file(self) -> Path:
        return self.artifacts / "opportunities.csv"

    @property
    def names_file(self) -> Path:
        return self.artifacts / "topic_names.csv"

    @property
    def transcripts_file(self) -> Path:
        return self.artifacts / "name_transcripts.jsonl"

    @property
    def report_file(self) -> Path:
        return self.artifacts / "report.md"

    @property
    def figures_dir(self) -> Path:
        return self.artifacts / "figures"

    @property
    def run_report_file(self) -> Path:
        return self.out_dir / "run_report.json"


def _workspace(config: RunConfig) -> Workspace:
    return Workspace(Path(config.out_dir))


def _require(path: Path, stage: str, produced_by: str) -> Path:
    if not path.exists():
        raise StageError(
            stage, f"missing {path.name}; run the '{produced_by}' stage first"
        )
    return path


def _label_set(config: RunConfig) -> LabelSet:
    return LabelSet(tuple(config.label_names), config.fallback_label)


def _load_corpus(ws: Workspace, stage: str) -> corpus_mod.Corpus:
    path = _require(ws.corpus_file, stage, "ingest")
    result = corpus_mod.load_records(path, "jsonl")
    if result.rejects:
        raise StageError(stage, f"normalized corpus has {len(result.rejects)} bad rows")
    return result.corpus


def _load_label_results(ws: Workspace, stage: str, gamma: float) -> list[LabelResult]:
    path = _require(ws.labels_file, stage, "label")
    rows = read_labels_csv(path)
    return [LabelResult(app_id, (), label, gamma) for app_id, label, _ in rows]


def stage_ingest(config: RunConfig) -> dict:
    ws = _workspace(config)
    ws.artifacts.mkdir(parents=True, exist_ok=True)
    try:
        result = corpus_mod.load_records(
            config.input_path, config.input_format, source_tag=config.input_path
        )
    except (corpus_mod.CorpusLoadError, OSError) as exc:
        raise StageError("ingest", str(exc))
    if len(result.corpus) == 0:
        raise StageError("ingest", "no valid records in input")
    corpus_mod.save_records(result.corpus, ws.corpus_file, "jsonl")
    corpus_mod.write_reject_report(result.rejects, ws.rejects_file)
    LOGGER.info(
        "ingest: %d records kept, %d rejected", len(result.corpus), len(result.rejects)
    )
    return {"records": len(result.corpus), "rejects": len(result.rejects)}


def _build_scorer(config: RunConfig, labels: LabelSet):
    if config.scorer_kind == "stored":
        try:
            return StoredLogitsScorer(config.scorer_path)
        except OSError as exc:
            raise StageError("label", f"cannot read stored scores: {exc}")
    return KeywordScorer(config.keyword_rules, labels)


def stage_label(config: RunConfig) -> dict:
    ws = _workspace(config)
    labels = _label_set(config)
    documents = _load_corpus(ws, "label")
    scorer = _build_scorer(config, labels)
    results = classify_corpus(documents, scorer, labels, config.gamma)
    write_labels_csv(results, ws.labels_file)
    distribution = label_distribution(results, labels)
    _write_distribution_csv(distribution, ws.label_distribution_file)
    failures = sum(1 for r in results if r.failed)
    LOGGER.info("label: %d documents, %d scorer failures", len(results), failures)
    return {"documents": len(results), "scorer_failures": failures}


def _write_distribution_csv(rows, path: Path) -> None:
    import csv

    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["label", "count", "rate"])
        for row in rows:
            writer.writerow([row.label, row.count, f"{row.percent:.2f}"])


def _embedder(config: RunConfig):
    url = config.resolved_provider_url()
    if url:
        LOGGER.info("embedding provider: %s", url)
        return HttpEmbeddingProvider(url)
    LOGGER.info("embedding provider: hashed fallback (dim %d)", config.hash_dim)
    return HashedEmbeddingProvider(dim=config.hash_dim, seed=config.seed)


def stage_topics(config: RunConfig) -> dict:
    ws = _workspace(config)
    documents = _load_corpus(ws, "topics")
    label_results = _load_label_results(ws, "topics", config.gamma)
    labels = _label_set(config)

    if config.fit_scope == "ai":
        in_scope = {r.application_id for r in label_results if r.label in labels.names}
    else:
        in_scope = {r.application_id for r in label_results if r.label != ERROR_LABEL}
    fit_records = [r for r in documents if r.application_id in in_scope]
    if not fit_records:
        raise StageError("topics", "no documents in scope for topic fitting")
    fit_corpus = corpus_mod.Corpus(tuple(fit_records), documents.source_tag)

    try:
        model = fit_topic_model(fit_corpus, _embedder(config), config.topic_config())
    except Exception as exc:
        raise StageError("topics", str(exc))
    save_model(model, ws.topic_model_file)
    write_keywords_csv(model, ws.topic_keywords_file)
    write_shares_csv(model, ws.topic_shares_file)
    LOGGER.info(
        "topics: %d documents fitted into %d topics", len(fit_records), len(model.shares)
    )
    return {"fit_documents": len(fit_records), "topics": len(model.shares)}


def stage_map(config: RunConfig) -> dict:
    ws = _workspace(config)
    documents = _load_corpus(ws, "map")
    label_results = _load_label_results(ws, "map", config.gamma)
    model = load_model(_require(ws.topic_model_file, "map", "topics"))
    mapping = cross_map(label_results, model, documents, config.window, _label_set(config))
    save_cross_map(mapping, ws.cross_map_file)
    write_matrix_csv(mapping, ws.matrix_file)
    write_series_csv(mapping, ws.series_file)
    LOGGER.info(
        "map: %d documents in cells, %d excluded", mapping.total(), mapping.excluded_total()
    )
    return {"mapped": mapping.total(), "excluded": mapping.excluded_total()}


def stage_trend(config: RunConfig) -> dict:
    ws = _workspace(config)
    mapping = load_cross_map(_require(ws.cross_map_file, "trend", "map"))
    trend_stats = compute_trends(mapping)
    write_trend_csv(trend_stats, ws.trend_stats_file)
    opportunities = discover_opportunities(mapping, trend_stats, config.min_count)
    write_opportunities_csv(opportunities, ws.opportunities_file)
    LOGGER.info(
        "trend: %d cells, %d opportunities", len(trend_stats), len(opportunities)
    )
    return {"cells": len(trend_stats), "opportunities": len(opportunities)}


def stage_name(config: RunConfig) -> dict:
    ws = _workspace(config)
    model = load_model(_require(ws.topic_model_file, "name", "topics"))
    url = config.resolved_provider_url()
    chat = HttpChatProvider(url) if (url and config.use_chat) else None
    LOGGER.info("naming provider: %s", url if chat else "offline fallback")
    namings = name_topics(model, chat)
    write_names_csv(namings, ws.names_file)
    write_transcripts(namings, ws.transcripts_file)
    from_provider = sum(1 for n in namings if n.source == "provider")
    return {"topics": len(namings), "from_provider": from_provider}


def stage_report(config: RunConfig) -> dict:
    ws = _workspace(config)
    for path, producer in (
        (ws.label_distribution_file, "label"),
        (ws.topic_shares_file, "topics"),
        (ws.trend_stats_file, "trend"),
    ):
        _require(path, "report", producer)
    written = report_mod.render_report(ws)
    LOGGER.info("report: wrote %d files", len(written))
    return {"files": [str(p.relative_to(ws.out_dir)) for p in written]}


_STAGE_FUNCTIONS = {
    "ingest": stage_ingest,
    "label": stage_label,
    "topics": stage_topics,
    "map": stage_map,
    "trend": stage_trend,
    "name": stage_name,
    "report": stage_report,
}


def run_stage(name: str, config: RunConfig) -> dict:
    if name not in _STAGE_FUNCTIONS:
        raise ValueError(f"unknown stage {name!r}")
    return _STAGE_FUNCTIONS[name](config)


def run_pipeline(config: RunConfig) -> dict:
    """Execute every stage in order and write the run report."""
    ws = _workspace(config)
    ws.out_dir.mkdir(parents=True, exist_ok=True)
    url = config.resolved_provider_url()
    report = {
        "config": config.to_dict(),
        "seed": config.seed,
        "stages": {},
        "timings": {},
        "provider": {
            "embedding": url or "hashed-fallback",
            "chat": url if (url and config.use_chat) else "offline-fallback",
        },
    }
    for stage in STAGES:
        started = time.perf_counter()
        outcome = run_stage(stage, config)
        elapsed = time.perf_counter() - started
        report["stages"][stage] = outcome
        report["timings"][stage] = round(elapsed, 6)
        LOGGER.info("stage %s finished in %.3fs", stage, elapsed)
    report["rejects"] = report["stages"]["ingest"]["rejects"]
    ws.run_report_file.write_text(
        json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return report
