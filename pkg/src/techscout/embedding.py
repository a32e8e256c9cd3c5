"""Document embeddings and dimensionality reduction.

Two embedding routes share one contract: a remote HTTP provider for real
deployments and a hashed TF-IDF fallback that needs no network and is fully
deterministic. Reduction is principal components computed by power iteration
on the covariance matrix, which keeps the artifact reproducible bit-for-bit
across platforms given the same seed.
"""

from __future__ import annotations

import hashlib
import logging
import math
import time
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import requests

from .text import tokenize

LOGGER = logging.getLogger(__name__)

DEFAULT_HASH_DIM = 256
DEFAULT_TARGET_DIM = 16
EMBED_BATCH_SIZE = 64


class EmbeddingError(Exception):
    """Raised when an embedding provider cannot produce usable vectors."""


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Row-aligned document ids and their vectors."""

    ids: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self) -> None:
        if self.vectors.ndim != 2:
            raise ValueError("vectors must be a 2-D array")
        if len(self.ids) != self.vectors.shape[0]:
            raise ValueError("ids and vector rows must align")
        if self.vectors.shape[1] < 1:
            raise ValueError("vectors must have at least one column")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate ids in embedding matrix")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


def _bucket(token: str, dim: int, seed: int) -> int:
    """Stable hash bucket for a token, independent of process state."""
    digest = hashlib.blake2b(
        token.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little", signed=True)
    ).digest()
    return int.from_bytes(digest, "big") % dim


def hashed_embeddings(
    texts: Sequence[str], dim: int = DEFAULT_HASH_DIM, seed: int = 0
) -> np.ndarray:
    """Hashed TF-IDF vectors, one L2-normalized row per text.

    Each token is hashed into one of ``dim`` buckets and contributes its
    term frequency scaled by ln(1 + N / df). Texts with no usable tokens
    become zero rows.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    token_lists = [tokenize(t) for t in texts]
    n_docs = len(texts)
    df: Counter[str] = Counter()
    for tokens in token_lists:
        df.update(set(tokens))
    rows = np.zeros((n_docs, dim), dtype=float)
    for i, tokens in enumerate(token_lists):
        if not tokens:
            continue
        for token, count in Counter(tokens).items():
            weight = count * math.log(1.0 + n_docs / df[token])
            rows[i, _bucket(token, dim, seed)] += weight
        norm = float(np.linalg.norm(rows[i]))
        if norm > 0.0:
            rows[i] /= norm
    return rows


class HashedEmbeddingProvider:
    """Offline provider wrapping hashed_embeddings under the provider contract."""

    def __init__(self, dim: int = DEFAULT_HASH_DIM, seed: int = 0):
        if dim < 2:
            raise ValueError("document embeddings need at least 2 dimensions")
        self.dim = dim
        self.seed = seed

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return hashed_embeddings(texts, dim=self.dim, seed=self.seed)


class HttpEmbeddingProvider:
    """Remote embedding service speaking POST /embed.

    Request body is {"texts": [...]}, response {"vectors": [[...], ...]}.
    Texts go out in batches; a non-200 response or connection error is
    treated as transient and retried with exponential backoff up to
    ``max_attempts`` tries per batch. A response whose vectors disagree on
    width is a contract violation and fails immediately.
    """

    def __init__(
        self,
        base_url: str,
        batch_size: int = EMBED_BATCH_SIZE,
        max_attempts: int = 3,
        timeout: float = 30.0,
        backoff: float = 1.0,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.batch_size = batch_size
        self.max_attempts = max_attempts
        self.timeout = timeout
        self.backoff = backoff
        self.session = session or requests.Session()

    def _post_batch(self, batch: list[str]) -> list[list[float]]:
        url = f"{self.base_url}/embed"
        last_error: str = "no attempts made"
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                response = self.session.post(url, json={"texts": batch}, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = str(exc)
                LOGGER.warning("embed attempt %d failed: %s", attempt + 1, exc)
                continue
            if response.status_code != 200:
                last_error = f"HTTP {response.status_code}"
                LOGGER.warning("embed attempt %d got %s", attempt + 1, last_error)
                continue
            payload = response.json()
            vectors = payload.get("vectors")
            if not isinstance(vectors, list) or len(vectors) != len(batch):
                raise EmbeddingError(
                    f"provider returned {len(vectors) if isinstance(vectors, list) else 'no'}"
                    f" vectors for a batch of {len(batch)}"
                )
            return vectors
        raise EmbeddingError(
            f"embedding request failed after {self.max_attempts} attempts: {last_error}"
        )

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        collected: list[list[float]] = []
        items = list(texts)
        for start in range(0, len(items), self.batch_size):
            collected.extend(self._post_batch(items[start : start + self.batch_size]))
        if not collected:
            return np.zeros((0, 0), dtype=float)
        width = len(collected[0])
        for i, vec in enumerate(collected):
            if len(vec) != width:
                raise EmbeddingError(
                    f"vector {i} has width {len(vec)}, expected {width}; "
                    "mixed dimensions are a provider contract violation"
                )
        return np.asarray(collected, dtype=float)


def embed_documents(ids: Sequence[str], texts: Sequence[str], provider) -> EmbeddingMatrix:
    """Embed texts through a provider and bind rows to document ids.

    Downstream geometry (clustering, reduction) needs at least 2 columns, so
    a provider that yields thinner vectors is rejected here.
    """
    if len(ids) != len(texts):
        raise ValueError("ids and texts must align")
    vectors = np.asarray(provider.embed(texts), dtype=float)
    if vectors.ndim != 2 or vectors.shape[0] != len(ids):
        raise EmbeddingError("provider returned a malformed matrix")
    if vectors.shape[1] < 2:
        raise EmbeddingError(
            f"provider produced {vectors.shape[1]}-dimensional vectors; need at least 2"
        )
    if not np.all(np.isfinite(vectors)):
        raise EmbeddingError("provider returned non-finite values")
    return EmbeddingMatrix(tuple(ids), vectors)


def reduce_dimensions(
    matrix: np.ndarray,
    target_dim: int = DEFAULT_TARGET_DIM,
    seed: int = 0,
    max_iter: int = 500,
    tol: float = 1e-12,
) -> np.ndarray:
    """Project rows onto leading principal components via power iteration.

    Components are extracted one at a time from the covariance matrix with
    deflation; each iteration re-orthogonalizes against the components
    already found to stop numerical drift. Start vectors come from a seeded
    generator and each component's sign is fixed so its largest-magnitude
    coordinate is positive, making the output reproducible. The result has
    min(target_dim, effective rank) columns; data with no variance at all
    reduces to zeros.
    """
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    n, d = X.shape
    if target_dim < 1:
        raise ValueError("target_dim must be positive")
    if n == 0:
        return np.zeros((0, min(target_dim, d)), dtype=float)

    centered = X - X.mean(axis=0)
    denom = max(n - 1, 1)
    cov = centered.T @ centered / denom
    total_var = float(np.trace(cov))
    if total_var <= tol:
        LOGGER.warning("reduce_dimensions: input has no variance; returning zeros")
        return np.zeros((n, min(target_dim, d)), dtype=float)

    rng = np.random.default_rng(seed)
    eig_floor = max(tol, 1e-9 * total_var)
    components: list[np.ndarray] = []
    work = cov.copy()
    for _ in range(min(target_dim, d)):
        v = rng.standard_normal(d)
        for u in components:
            v -= (v @ u) * u
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            break
        v /= norm
        for _ in range(max_iter):
            w = work @ v
            for u in components:
                w -= (w @ u) * u
            norm = float(np.linalg.norm(w))
            if norm <= eig_floor:
                w = None
                break
            w /= norm
            if float(np.linalg.norm(w - v)) < 1e-10:
                v = w
                break
            v = w
        if w is None:
            break
        eigenvalue = float(v @ work @ v)
        if eigenvalue <= eig_floor:
            break
        peak = int(np.argmax(np.abs(v)))
        if v[peak] < 0:
            v = -v
        components.append(v)
        work = work - eigenvalue * np.outer(v, v)

    if not components:
        LOGGER.warning("reduce_dimensions: no usable components; returning zeros")
        return np.zeros((n, min(target_dim, d)), dtype=float)
    basis = np.stack(components, axis=1)
    return centered @ basis


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors; zero vectors give 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))
