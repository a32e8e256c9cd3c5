"""Topic extraction pipeline: reduce, cluster, score terms, pick keywords.

The five stages run in a fixed order: embed documents, project the vectors
onto leading principal components, group them with density-based clustering,
score terms per cluster with class-based TF-IDF, and select a diverse
keyword list per topic with maximum marginal relevance. Everything is
seeded and deterministic so fitted models reproduce byte-for-byte.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .corpus import Corpus
from .embedding import (
    DEFAULT_TARGET_DIM,
    EmbeddingMatrix,
    cosine_similarity,
    embed_documents,
    hashed_embeddings,
    reduce_dimensions,
)
from .text import tokenize

LOGGER = logging.getLogger(__name__)

OUTLIER = -1

DEFAULT_MIN_PTS = 5
DEFAULT_MMR_LAMBDA = 0.5
DEFAULT_KEYWORDS_PER_TOPIC = 20
DEFAULT_MAX_TOPICS = 7
# Clusters below this fraction of the fitted corpus are dissolved into their
# nearest neighbor; it only guards against degenerate tiny clusters.
MIN_SURVIVAL_FRACTION = 0.001


class TopicError(Exception):
    """Raised when topic fitting cannot produce a usable model."""


@dataclass(frozen=True)
class TopicConfig:
    """Knobs for the reduce/cluster/keyword stages. eps None means auto-tune."""

    target_dim: int = DEFAULT_TARGET_DIM
    eps: float | None = None
    min_pts: int = DEFAULT_MIN_PTS
    mmr_lambda: float = DEFAULT_MMR_LAMBDA
    k: int = DEFAULT_KEYWORDS_PER_TOPIC
    max_topics: int = DEFAULT_MAX_TOPICS
    seed: int = 0

    def as_dict(self) -> dict:
        return {
            "target_dim": self.target_dim,
            "eps": self.eps,
            "min_pts": self.min_pts,
            "mmr_lambda": self.mmr_lambda,
            "k": self.k,
            "max_topics": self.max_topics,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TopicModel:
    """Fitted topic assignments plus per-topic keywords and shares.

    Topic ids are contiguous 0..M-1 ordered by descending share; OUTLIER
    marks unassigned documents, which are excluded from shares.
    """

    doc_ids: tuple[str, ...]
    assignments: tuple[int, ...]
    keywords: dict[int, tuple[tuple[str, float], ...]]
    shares: dict[int, float]
    seed: int
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.doc_ids) != len(self.assignments):
            raise ValueError("doc_ids and assignments must align")
        topic_ids = sorted(t for t in set(self.assignments) if t != OUTLIER)
        if topic_ids != list(range(len(topic_ids))):
            raise ValueError("topic ids must be contiguous from 0")

    @property
    def topic_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.shares))

    def assignment_map(self) -> dict[str, int]:
        return dict(zip(self.doc_ids, self.assignments))

    def topic_of(self, doc_id: str) -> int | None:
        try:
            index = self.doc_ids.index(doc_id)
        except ValueError:
            return None
        return self.assignments[index]


def reduce_embeddings(
    matrix: EmbeddingMatrix, target_dim: int = DEFAULT_TARGET_DIM, seed: int = 0
) -> EmbeddingMatrix:
    """Principal-component projection of an embedding matrix (id-preserving)."""
    if target_dim > matrix.dim:
        LOGGER.debug(
            "target_dim %d exceeds input dim %d; clamping", target_dim, matrix.dim
        )
    reduced = reduce_dimensions(matrix.vectors, target_dim=target_dim, seed=seed)
    return EmbeddingMatrix(matrix.ids, reduced)


def _pairwise_distances(points: np.ndarray) -> np.ndarray:
    return cdist(points, points, metric="euclidean")


def auto_eps(points: np.ndarray, min_pts: int = DEFAULT_MIN_PTS) -> float:
    """Neighborhood radius heuristic: 90th percentile of (min_pts-1)-NN distances."""
    n = len(points)
    if n < 2:
        return 1e-9
    k = max(1, min(min_pts - 1, n - 1))
    dists = _pairwise_distances(points)
    knn = np.sort(dists, axis=1)[:, k]  # column 0 is self-distance 0
    eps = float(np.percentile(knn, 90))
    eps = max(eps, 1e-9)
    LOGGER.info("auto eps: 90th percentile of %d-NN distances = %r", k, eps)
    return eps


def cluster(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Density-based clustering with DBSCAN semantics.

    A point is core iff at least min_pts points (itself included) lie within
    Euclidean distance eps. Clusters are connected components of core points
    plus their border points; everything else is OUTLIER. Ids are assigned
    in first-seen document order, then remapped so id 0 is the largest
    cluster.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    if n == 0:
        return np.empty(0, dtype=int)
    if not np.all(np.isfinite(X)):
        raise ValueError("cluster input must be finite")
    dists = _pairwise_distances(X)
    neighbor_lists = [np.flatnonzero(dists[i] <= eps) for i in range(n)]

    UNVISITED = -2
    labels = np.full(n, UNVISITED, dtype=int)
    next_id = 0
    for start in range(n):
        if labels[start] != UNVISITED:
            continue
        neighbors = neighbor_lists[start]
        if len(neighbors) < min_pts:
            labels[start] = OUTLIER
            continue
        labels[start] = next_id
        queue = [int(j) for j in neighbors if j != start]
        head = 0
        while head < len(queue):
            point = queue[head]
            head += 1
            if labels[point] == OUTLIER:
                labels[point] = next_id  # border point reclaimed
            if labels[point] != UNVISITED:
                continue
            labels[point] = next_id
            expansion = neighbor_lists[point]
            if len(expansion) >= min_pts:
                queue.extend(int(j) for j in expansion)
        next_id += 1

    return _remap_by_size(labels)


def _remap_by_size(labels: np.ndarray) -> np.ndarray:
    """Relabel cluster ids by descending size; ties keep first-seen order."""
    ids = [cid for cid in dict.fromkeys(labels.tolist()) if cid != OUTLIER]
    sizes = Counter(cid for cid in labels.tolist() if cid != OUTLIER)
    order = sorted(ids, key=lambda cid: -sizes[cid])  # stable: ties keep first-seen
    mapping = {old: new for new, old in enumerate(order)}
    mapping[OUTLIER] = OUTLIER
    return np.array([mapping[cid] for cid in labels.tolist()], dtype=int)


def ctfidf(
    assignments: Sequence[int], tokenized_docs: Sequence[Sequence[str]]
) -> dict[int, dict[str, float]]:
    """Class-based TF-IDF over topics.

    Each topic's documents are concatenated into one class document;
    score(t, c) = tf(t, c) * ln(1 + A / f(t)) where tf is the class-relative
    frequency, f(t) the term's total count across classes, and A the average
    class token count. Outlier documents do not contribute.
    """
    if len(assignments) != len(tokenized_docs):
        raise ValueError("assignments must cover tokenized_docs")
    class_counts: dict[int, Counter[str]] = {}
    for topic, tokens in zip(assignments, tokenized_docs):
        if topic == OUTLIER:
            continue
        class_counts.setdefault(topic, Counter()).update(tokens)

    class_tokens = {c: sum(counts.values()) for c, counts in class_counts.items()}
    total_counts: Counter[str] = Counter()
    for counts in class_counts.values():
        total_counts.update(counts)
    n_classes = len(class_counts)
    avg_tokens = sum(class_tokens.values()) / n_classes if n_classes else 0.0

    scores: dict[int, dict[str, float]] = {}
    for topic in sorted(class_counts):
        counts = class_counts[topic]
        size = class_tokens[topic]
        if size == 0:
            LOGGER.warning("topic %d has no tokens; empty keyword scores", topic)
            scores[topic] = {}
            continue
        scores[topic] = {
            term: (count / size) * math.log(1.0 + avg_tokens / total_counts[term])
            for term, count in counts.items()
        }
    return scores


def ranked_terms(score_map: Mapping[str, float]) -> list[tuple[str, float]]:
    """Terms by descending score; ties break alphabetically."""
    return sorted(score_map.items(), key=lambda item: (-item[1], item[0]))


def mmr_select(
    candidates: Sequence[tuple[str, float]],
    term_vectors: Mapping[str, np.ndarray],
    mmr_lambda: float,
    k: int,
) -> list[str]:
    """Greedy maximum marginal relevance over ranked candidate terms.

    Relevance is min-max normalized to [0,1]; the first pick is the most
    relevant term, then each round maximizes
    lambda*relevance - (1-lambda)*max cosine to the picked set. Ties go to
    the earlier-ranked candidate. Returns min(k, len(candidates)) terms.
    """
    if not candidates:
        raise ValueError("mmr_select requires at least one candidate")
    if k < 1:
        raise ValueError("k must be at least 1")
    terms = [t for t, _ in candidates]
    rel = np.array([score for _, score in candidates], dtype=float)
    span = float(rel.max() - rel.min())
    rel = (rel - rel.min()) / span if span > 0 else np.ones_like(rel)

    vectors = np.zeros((len(terms), 0))
    if terms:
        width = max((np.asarray(term_vectors[t]).shape[0] for t in terms), default=0)
        vectors = np.zeros((len(terms), width), dtype=float)
        for i, t in enumerate(terms):
            v = np.asarray(term_vectors[t], dtype=float)
            vectors[i, : v.shape[0]] = v
        norms = np.linalg.norm(vectors, axis=1)
        nonzero = norms > 0
        vectors[nonzero] /= norms[nonzero, None]

    picked: list[int] = [int(np.argmax(rel))]
    max_cos = vectors @ vectors[picked[0]]
    while len(picked) < min(k, len(terms)):
        objective = mmr_lambda * rel - (1.0 - mmr_lambda) * max_cos
        objective[picked] = -np.inf
        choice = int(np.argmax(objective))
        picked.append(choice)
        max_cos = np.maximum(max_cos, vectors @ vectors[choice])
    return [terms[i] for i in picked]


def _merge_clusters(
    labels: np.ndarray, reduced: np.ndarray, min_size: float, max_topics: int
) -> np.ndarray:
    """Dissolve undersized clusters and enforce the topic cap.

    Each victim (smallest first) is absorbed by the cluster whose centroid
    is most cosine-similar; survivors are finally relabeled by size.
    """
    members: dict[int, list[int]] = {}
    for index, cid in enumerate(labels.tolist()):
        if cid != OUTLIER:
            members.setdefault(cid, []).append(index)

    def centroid(cid: int) -> np.ndarray:
        return reduced[members[cid]].mean(axis=0)

    while len(members) > 1:
        undersized = [cid for cid in members if len(members[cid]) < min_size]
        if undersized:
            victim = min(undersized, key=lambda c: (len(members[c]), c))
        elif len(members) > max_topics:
            victim = min(members, key=lambda c: (len(members[c]), c))
        else:
            break
        victim_centroid = centroid(victim)
        target = max(
            (c for c in members if c != victim),
            key=lambda c: (cosine_similarity(victim_centroid, centroid(c)), -c),
        )
        LOGGER.info(
            "merging cluster %d (%d docs) into %d", victim, len(members[victim]), target
        )
        members[target].extend(members.pop(victim))

    merged = np.full(len(labels), OUTLIER, dtype=int)
    for cid, idxs in members.items():
        merged[idxs] = cid
    return _remap_by_size(merged)


def fit_topic_model(
    corpus: Corpus, embedder, config: TopicConfig = TopicConfig()
) -> TopicModel:
    """Run the full pipeline on a corpus and return the fitted model."""
    if len(corpus) == 0:
        raise TopicError("cannot fit topics on an empty corpus")
    records = list(corpus)
    ids = [r.application_id for r in records]
    texts = [r.text for r in records]

    matrix = embed_documents(ids, texts, embedder)
    reduced = reduce_dimensions(matrix.vectors, target_dim=config.target_dim, seed=config.seed)

    eps = config.eps if config.eps is not None else auto_eps(reduced, config.min_pts)
    labels = cluster(reduced, eps=eps, min_pts=config.min_pts)
    if np.all(labels == OUTLIER):
        raise TopicError(
            "clustering produced only outliers; relax eps (larger) or min_pts (smaller)"
        )

    min_size = MIN_SURVIVAL_FRACTION * len(records)
    labels = _merge_clusters(labels, reduced, min_size, config.max_topics)

    tokenized = [tokenize(t) for t in texts]
    score_maps = ctfidf(labels.tolist(), tokenized)

    keywords: dict[int, tuple[tuple[str, float], ...]] = {}
    for topic, score_map in score_maps.items():
        candidates = [(t, s) for t, s in ranked_terms(score_map) if s > 0]
        if not candidates:
            keywords[topic] = ()
            continue
        terms = [t for t, _ in candidates]
        vector_rows = hashed_embeddings(terms, seed=config.seed)
        term_vectors = {t: vector_rows[i] for i, t in enumerate(terms)}
        chosen = mmr_select(candidates, term_vectors, config.mmr_lambda, config.k)
        relevance = dict(candidates)
        keywords[topic] = tuple((t, relevance[t]) for t in chosen)

    assigned = [int(t) for t in labels if t != OUTLIER]
    sizes = Counter(assigned)
    total = len(assigned)
    shares = {topic: 100.0 * sizes[topic] / total for topic in sorted(sizes)}

    params = config.as_dict()
    params["eps_used"] = eps
    params["n_docs"] = len(records)
    return TopicModel(
        doc_ids=tuple(ids),
        assignments=tuple(int(t) for t in labels),
        keywords=keywords,
        shares=shares,
        seed=config.seed,
        params=params,
    )


def topic_shares(model: TopicModel) -> list[tuple[int, int, float]]:
    """(topic id, count, share%) rows, descending by share."""
    counts = Counter(t for t in model.assignments if t != OUTLIER)
    rows = [(topic, counts[topic], model.shares[topic]) for topic in sorted(model.shares)]
    rows.sort(key=lambda row: (-row[2], row[0]))
    return rows


def save_model(model: TopicModel, path: str | Path) -> None:
    """Persist a fitted model as a single JSON document."""
    payload = {
        "params": model.params,
        "seed": model.seed,
        "assignments": dict(zip(model.doc_ids, (int(t) for t in model.assignments))),
        "keywords": {
            str(topic): [[term, score] for term, score in pairs]
            for topic, pairs in model.keywords.items()
        },
        "shares": {str(topic): share for topic, share in model.shares.items()},
    }
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")


def load_model(path: str | Path) -> TopicModel:
    with Path(path).open("r", encoding="utf-8") as handle:
        payload = json.load(handle)
    assignments = payload["assignments"]
    doc_ids = tuple(assignments)
    return TopicModel(
        doc_ids=doc_ids,
        assignments=tuple(int(assignments[d]) for d in doc_ids),
        keywords={
            int(topic): tuple((term, float(score)) for term, score in pairs)
            for topic, pairs in payload["keywords"].items()
        },
        shares={int(topic): float(share) for topic, share in payload["shares"].items()},
        seed=int(payload["seed"]),
        params=payload.get("params", {}),
    )


def write_keywords_csv(model: TopicModel, path: str | Path) -> None:
    """Keyword export contract: topic,rank,term,score."""
    import csv

    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["topic", "rank", "term", "score"])
        for topic in sorted(model.keywords):
            for rank, (term, score) in enumerate(model.keywords[topic], start=1):
                writer.writerow([topic, rank, term, repr(score)])


def write_shares_csv(model: TopicModel, path: str | Path) -> None:
    """Share table: topic,count,share with shares shown to 2 decimals."""
    import csv

    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["topic", "count", "share"])
        for topic, count, share in topic_shares(model):
            writer.writerow([topic, count, f"{share:.2f}"])
