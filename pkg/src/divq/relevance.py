"""Pluggable semantic-relevance scoring between two texts.

Three scorer kinds: cosine over vectors from a precomputed embedding file,
cosine over vectors fetched from an HTTP embedder endpoint, and a
deterministic lexical fallback (cosine of unigram count vectors). All scorers
are read-only after construction and safe for concurrent use; per-text
vectors are cached under a lock.

Lexical scores are not interchangeable with embedding scores: thresholds
calibrated against a sentence embedder do not transfer, which is why the CLI
demands an explicit alpha for the lexical kind.
"""

from __future__ import annotations

import hashlib
import math
import threading
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import requests

from .core import _iter_jsonl
from .errors import (
    DimensionMismatch,
    DuplicateText,
    EmptyBatch,
    EmptyCorpus,
    EndpointFailure,
    MalformedLine,
    MissingEmbedding,
    ScorerError,
    ZeroVector,
)
from .textproc import DEFAULT_CONFIG, TokenizeConfig, tokenize


def _check_pair(a: str, b: str) -> None:
    if not a or not b:
        raise ValueError("score() requires two non-empty texts")


def _cosine(va: np.ndarray, vb: np.ndarray) -> float:
    na = float(np.dot(va, va))
    nb = float(np.dot(vb, vb))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("text embeds to an all-zero vector")
    cos = float(np.dot(va, vb)) / math.sqrt(na * nb)
    return max(-1.0, min(1.0, cos))


class RelevanceScorer:
    """Interface: kind, fingerprint, score(a, b) in [-1, 1]."""

    kind: str = "abstract"

    def fingerprint(self) -> str:
        raise NotImplementedError

    def score(self, a: str, b: str) -> float:
        raise NotImplementedError


class LexicalScorer(RelevanceScorer):
    """Cosine of unigram count vectors under the default tokenizer.

    Deterministic stand-in for an embedding scorer; identical texts score
    exactly 1.0. Operands are ordered canonically so symmetry is exact.
    """

    kind = "lexical"

    def __init__(self, config: TokenizeConfig = DEFAULT_CONFIG, cache: bool = True):
        self._config = config
        self._cache: dict[str, Counter] | None = {} if cache else None
        self._lock = threading.Lock()

    def fingerprint(self) -> str:
        return f"lexical:fold_case={self._config.fold_case}:strip_punct={self._config.strip_punct}"

    def _counts(self, text: str) -> Counter:
        if self._cache is not None:
            with self._lock:
                hit = self._cache.get(text)
            if hit is not None:
                return hit
        counts = Counter(tokenize(text, self._config))
        if self._cache is not None:
            with self._lock:
                self._cache[text] = counts
        return counts

    def score(self, a: str, b: str) -> float:
        _check_pair(a, b)
        if b < a:
            a, b = b, a
        ca = self._counts(a)
        cb = self._counts(b)
        if not ca or not cb:
            raise ZeroVector("text tokenizes to an all-zero count vector")
        if ca == cb:
            return 1.0
        dot = sum(count * cb[token] for token, count in ca.items())
        norm_a = sum(count * count for count in ca.values())
        norm_b = sum(count * count for count in cb.values())
        return dot / math.sqrt(norm_a * norm_b)


@dataclass(frozen=True)
class EmbeddingTable:
    """Text-keyed vectors of one uniform dimension."""

    vectors: dict
    dim: int
    digest: str


def load_embedding_file(path: str) -> EmbeddingTable:
    """Read a JSONL table of {"text", "vector"} rows with uniform dimension."""
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    sha = hashlib.sha256()
    for line_no, obj in _iter_jsonl(path):
        try:
            text = obj["text"]
            raw = obj["vector"]
        except (KeyError, TypeError) as exc:
            raise MalformedLine(path, line_no, "row needs text and vector") from exc
        if not isinstance(text, str) or not text:
            raise MalformedLine(path, line_no, "text must be a non-empty string")
        vec = np.asarray(raw, dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise MalformedLine(path, line_no, "vector must be a flat non-empty list")
        if not np.isfinite(vec).all():
            raise MalformedLine(path, line_no, "vector contains non-finite values")
        if dim is None:
            dim = int(vec.size)
        elif vec.size != dim:
            raise DimensionMismatch(line_no)
        if text in vectors:
            raise DuplicateText(f"text {text!r} appears twice")
        vectors[text] = vec
        sha.update(text.encode("utf-8"))
        sha.update(vec.tobytes())
    if not vectors:
        raise EmptyCorpus(f"no embeddings in {path}")
    return EmbeddingTable(vectors=vectors, dim=dim, digest=sha.hexdigest())


class EmbeddingFileScorer(RelevanceScorer):
    """Cosine over vectors looked up in a preloaded embedding table."""

    kind = "embedding-file"

    def __init__(self, table: EmbeddingTable):
        self._table = table

    def fingerprint(self) -> str:
        return f"embedding-file:{self._table.digest}"

    def _vector(self, text: str) -> np.ndarray:
        vec = self._table.vectors.get(text)
        if vec is None:
            raise MissingEmbedding(text)
        return vec

    def score(self, a: str, b: str) -> float:
        _check_pair(a, b)
        if b < a:
            a, b = b, a
        return _cosine(self._vector(a), self._vector(b))


class EmbeddingEndpointScorer(RelevanceScorer):
    """Cosine over vectors fetched in batches from an HTTP embedder.

    POST {base_url}/embed with {"texts": [...]} must answer
    {"vectors": [[...], ...], "dim": int}. Vectors are cached per text;
    at most max_in_flight requests run concurrently.
    """

    kind = "embedding-endpoint"

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        batch_size: int = 32,
        max_in_flight: int = 4,
        cache: bool = True,
        session: requests.Session | None = None,
    ):
        self._base_url = base_url.rstrip("/")
        self._timeout = timeout
        self._batch_size = batch_size
        self._semaphore = threading.BoundedSemaphore(max_in_flight)
        self._cache: dict[str, np.ndarray] | None = {} if cache else None
        self._lock = threading.Lock()
        self._session = session or requests.Session()

    def fingerprint(self) -> str:
        return f"embedding-endpoint:{self._base_url}"

    def _fetch(self, texts: Sequence[str]) -> list[np.ndarray]:
        try:
            with self._semaphore:
                response = self._session.post(
                    f"{self._base_url}/embed",
                    json={"texts": list(texts)},
                    timeout=self._timeout,
                )
        except requests.RequestException as exc:
            raise EndpointFailure(f"embed request failed: {exc}") from exc
        if response.status_code != 200:
            raise EndpointFailure(
                f"embed endpoint answered {response.status_code}",
                status=response.status_code,
            )
        try:
            payload = response.json()
            vectors = payload["vectors"]
            dim = payload["dim"]
        except (ValueError, KeyError, TypeError) as exc:
            raise EndpointFailure(f"malformed embed response: {exc}") from exc
        if len(vectors) != len(texts):
            raise EndpointFailure(
                f"embed endpoint returned {len(vectors)} vectors for {len(texts)} texts"
            )
        out = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim != 1 or arr.size != dim or not np.isfinite(arr).all():
                raise EndpointFailure("embed endpoint returned a malformed vector")
            out.append(arr)
        return out

    def _vectors(self, texts: Sequence[str]) -> list[np.ndarray]:
        if self._cache is None:
            return self._fetch(texts)
        with self._lock:
            missing = [t for t in dict.fromkeys(texts) if t not in self._cache]
        for start in range(0, len(missing), self._batch_size):
            chunk = missing[start : start + self._batch_size]
            fetched = self._fetch(chunk)
            with self._lock:
                for text, vec in zip(chunk, fetched):
                    self._cache[text] = vec
        with self._lock:
            return [self._cache[t] for t in texts]

    def prefetch(self, texts: Sequence[str]) -> None:
        """Warm the vector cache with batched requests."""
        if self._cache is not None and texts:
            self._vectors(list(texts))

    def score(self, a: str, b: str) -> float:
        _check_pair(a, b)
        if b < a:
            a, b = b, a
        va, vb = self._vectors([a, b])
        return _cosine(va, vb)


def batch_score(scorer: RelevanceScorer, pairs: Sequence[tuple[str, str]]) -> list[float]:
    """Score each (a, b) pair in order; a failing pair aborts with its index."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyBatch("batch_score needs at least one pair")
    prefetch = getattr(scorer, "prefetch", None)
    if prefetch is not None:
        texts: list[str] = []
        for a, b in pairs:
            texts.append(a)
            texts.append(b)
        prefetch(list(dict.fromkeys(texts)))
    scores = []
    for index, (a, b) in enumerate(pairs):
        try:
            scores.append(scorer.score(a, b))
        except ScorerError as exc:
            exc.pair_index = index
            raise
    return scores


def make_scorer(
    kind: str,
    embeddings_path: str | None = None,
    embed_url: str | None = None,
    config: TokenizeConfig = DEFAULT_CONFIG,
    timeout: float = 30.0,
) -> RelevanceScorer:
    """Construct a scorer from CLI-style flags."""
    if kind == "lexical":
        return LexicalScorer(config=config)
    if kind == "embed-file":
        if not embeddings_path:
            raise ValueError("embed-file scorer needs an embeddings path")
        return EmbeddingFileScorer(load_embedding_file(embeddings_path))
    if kind == "embed-http":
        if not embed_url:
            raise ValueError("embed-http scorer needs an endpoint URL")
        return EmbeddingEndpointScorer(embed_url, timeout=timeout)
    raise ValueError(f"unknown scorer kind {kind!r}")
