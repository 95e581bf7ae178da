"""Vector store, similarity search, and reranking.

Indexes are immutable after build and safe for concurrent reads.
Cosine and Okapi BM25 share the same deterministic tie-break:
descending score, then (doc_id, span start) ascending. Files round-trip
losslessly as JSON with full float precision.
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
import tempfile
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .chunking import Chunk, ChunkingConfig
from .embedding import EmbeddingBackend, embed_batch
from .errors import IntegrityError, ProvenanceError, TransportError, ValidationError

logger = logging.getLogger(__name__)

_BM25_TOKEN_RE = re.compile(r"[a-z0-9]+")

DEFAULT_K1 = 1.5
DEFAULT_B = 0.75
DEFAULT_CANDIDATE_DEPTH = 50


@dataclass(frozen=True)
class ScoredChunk:
    """A retrieved chunk with its similarity score and 1-based rank."""

    chunk: Chunk
    score: float
    rank: int


def _tie_key(chunk: Chunk) -> tuple[str, int]:
    return (chunk.doc_id, chunk.start)


def _to_ranked(ordered: Sequence[tuple[Chunk, float]]) -> list[ScoredChunk]:
    return [
        ScoredChunk(chunk=c, score=float(s), rank=i + 1)
        for i, (c, s) in enumerate(ordered)
    ]


class VectorIndex:
    """Chunks plus their embedding matrix with provenance metadata."""

    def __init__(
        self,
        chunks: Sequence[Chunk],
        vectors: np.ndarray,
        backend_name: str,
        chunking: dict,
    ):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(chunks):
            raise IntegrityError(
                f"vector matrix shape {vectors.shape} does not match {len(chunks)} chunks"
            )
        if not np.all(np.isfinite(vectors)):
            raise IntegrityError("index vectors contain non-finite values")
        if not backend_name:
            raise IntegrityError("index backend provenance is empty")
        if not chunking:
            raise IntegrityError("index chunking provenance is empty")
        self.chunks = list(chunks)
        self.vectors = vectors
        self.backend_name = backend_name
        self.chunking = dict(chunking)
        self._norms = np.linalg.norm(vectors, axis=1)
        self._by_id = {c.chunk_id: i for i, c in enumerate(self.chunks)}
        if len(self._by_id) != len(self.chunks):
            dupes = [
                cid
                for cid, n in Counter(c.chunk_id for c in self.chunks).items()
                if n > 1
            ]
            raise IntegrityError(f"duplicate chunk ids in index: {dupes[:5]}")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.chunks)

    def chunk_by_id(self, chunk_id: str) -> Chunk:
        try:
            return self.chunks[self._by_id[chunk_id]]
        except KeyError:
            raise IntegrityError(f"unknown chunk_id {chunk_id!r} in index") from None


def build_index(
    chunks: Sequence[Chunk], backend: EmbeddingBackend, chunking_cfg: ChunkingConfig
) -> VectorIndex:
    """Embed chunk texts and assemble a vector index."""
    if not chunks:
        raise ValidationError("cannot build an index over zero chunks")
    vectors = embed_batch(backend, [c.text for c in chunks])
    return VectorIndex(
        chunks=chunks,
        vectors=vectors,
        backend_name=backend.name,
        chunking=chunking_cfg.to_dict(),
    )


def cosine_search(
    index: VectorIndex,
    query_vec: np.ndarray,
    n: int,
    scope: Optional[str] = None,
) -> list[ScoredChunk]:
    """Top-n chunks by cosine similarity, optionally within one document.

    Zero-norm query or chunk vectors score 0 for the affected pairs
    rather than erroring.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    query_vec = np.asarray(query_vec, dtype=np.float64)
    if query_vec.shape != (index.dim,):
        raise IntegrityError(
            f"query vector shape {query_vec.shape} does not match index dim {index.dim}"
        )

    if scope is None:
        rows = range(len(index))
    else:
        rows = [i for i, c in enumerate(index.chunks) if c.doc_id == scope]
        if not rows:
            logger.warning("scope %r matches no chunks in index", scope)
            return []

    qnorm = float(np.linalg.norm(query_vec))
    if qnorm == 0.0:
        logger.debug("zero-norm query vector; all similarities defined as 0")

    scored = []
    for i in rows:
        denom = qnorm * index._norms[i]
        score = float(index.vectors[i] @ query_vec / denom) if denom > 0 else 0.0
        scored.append((index.chunks[i], score))
    scored.sort(key=lambda cs: (-cs[1], _tie_key(cs[0])))
    return _to_ranked(scored[:n])


def _bm25_tokenize(text: str) -> list[str]:
    return _BM25_TOKEN_RE.findall(text.lower())


class BM25Index:
    """Okapi BM25 over tokenized chunks.

    Scoring uses idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1) with the
    usual (k1, b) length normalisation. Scoped searches recompute the
    collection statistics over just the scoped document's chunks, so they
    equal a fresh search over that sub-collection.
    """

    def __init__(
        self, chunks: Sequence[Chunk], k1: float = DEFAULT_K1, b: float = DEFAULT_B
    ):
        if k1 < 0 or not (0 <= b <= 1):
            raise ValidationError("BM25 needs k1 >= 0 and 0 <= b <= 1")
        self.chunks = list(chunks)
        self.k1 = k1
        self.b = b
        self._tf = [Counter(_bm25_tokenize(c.text)) for c in self.chunks]
        self._lens = [sum(tf.values()) for tf in self._tf]
        self.n_docs = len(self.chunks)
        self.avgdl = (sum(self._lens) / self.n_docs) if self.n_docs else 0.0
        df: Counter = Counter()
        for tf in self._tf:
            df.update(tf.keys())
        self._idf = {
            t: math.log((self.n_docs - n + 0.5) / (n + 0.5) + 1.0)
            for t, n in df.items()
        }

    def score_one(self, query: str, i: int) -> float:
        """Score a single chunk against a query (used by tests as well)."""
        tokens = _bm25_tokenize(query)
        tf = self._tf[i]
        dl = self._lens[i]
        if dl == 0 or self.avgdl == 0:
            return 0.0
        norm = self.k1 * (1.0 - self.b + self.b * dl / self.avgdl)
        score = 0.0
        for t in tokens:
            f = tf.get(t, 0)
            if f == 0:
                continue
            score += self._idf.get(t, 0.0) * (f * (self.k1 + 1.0)) / (f + norm)
        return score

    def search(
        self, query: str, n: int, scope: Optional[str] = None
    ) -> list[ScoredChunk]:
        if n < 1:
            raise ValidationError("n must be >= 1")
        if scope is not None:
            scoped = [c for c in self.chunks if c.doc_id == scope]
            if not scoped:
                logger.warning("scope %r matches no chunks in BM25 index", scope)
                return []
            return BM25Index(scoped, k1=self.k1, b=self.b).search(query, n)
        if not _bm25_tokenize(query):
            logger.warning("query %r tokenizes to nothing; empty BM25 result", query)
            return []
        scored = [(c, self.score_one(query, i)) for i, c in enumerate(self.chunks)]
        scored.sort(key=lambda cs: (-cs[1], _tie_key(cs[0])))
        return _to_ranked(scored[:n])


def bm25_search(
    chunks: Sequence[Chunk],
    query: str,
    n: int,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    scope: Optional[str] = None,
) -> list[ScoredChunk]:
    """One-shot BM25 search; build a :class:`BM25Index` for repeated use."""
    return BM25Index(chunks, k1=k1, b=b).search(query, n, scope=scope)


class Reranker(ABC):
    """Reorders a candidate list; must return a permutation of its input."""

    name: str

    @abstractmethod
    def rerank(self, query: str, candidates: list[ScoredChunk]) -> list[ScoredChunk]:
        """Return the candidates reordered, with the reranker's own scores."""


class IdentityReranker(Reranker):
    name = "identity"

    def rerank(self, query: str, candidates: list[ScoredChunk]) -> list[ScoredChunk]:
        return list(candidates)


class ReverseReranker(Reranker):
    """Reverses the input order (scores negated to stay non-increasing)."""

    name = "reverse"

    def rerank(self, query: str, candidates: list[ScoredChunk]) -> list[ScoredChunk]:
        return [
            ScoredChunk(chunk=c.chunk, score=-c.score, rank=0)
            for c in reversed(candidates)
        ]


class EmbeddingReranker(Reranker):
    """Rescores candidates by cosine similarity under a second backend."""

    def __init__(self, backend: EmbeddingBackend):
        self.backend = backend
        self.name = f"embed:{backend.name}"

    def rerank(self, query: str, candidates: list[ScoredChunk]) -> list[ScoredChunk]:
        matrix = embed_batch(self.backend, [query] + [c.chunk.text for c in candidates])
        qvec, cvecs = matrix[0], matrix[1:]
        qnorm = np.linalg.norm(qvec)
        rescored = []
        for cand, vec in zip(candidates, cvecs):
            denom = qnorm * np.linalg.norm(vec)
            score = float(vec @ qvec / denom) if denom > 0 else 0.0
            rescored.append((cand.chunk, score))
        rescored.sort(key=lambda cs: (-cs[1], _tie_key(cs[0])))
        return [ScoredChunk(chunk=c, score=s, rank=0) for c, s in rescored]


def rerank(
    reranker: Reranker, query: str, candidates: list[ScoredChunk]
) -> tuple[list[ScoredChunk], bool]:
    """Apply a reranker and validate the permutation contract.

    Returns ``(reranked, fell_back)``; on a transport failure the input
    order is kept and ``fell_back`` is True so callers can flag the run.
    """
    if not candidates:
        raise ValidationError("rerank requires a non-empty candidate list")
    try:
        result = reranker.rerank(query, candidates)
    except TransportError as exc:
        logger.warning("reranker %s failed, falling back to input order: %s",
                       reranker.name, exc)
        fell_back = [
            ScoredChunk(chunk=c.chunk, score=c.score, rank=i + 1)
            for i, c in enumerate(candidates)
        ]
        return fell_back, True

    if Counter(c.chunk.chunk_id for c in result) != Counter(
        c.chunk.chunk_id for c in candidates
    ):
        raise IntegrityError(
            f"reranker {reranker.name!r} did not return a permutation of its input"
        )
    scores = [c.score for c in result]
    if any(scores[i] < scores[i + 1] for i in range(len(scores) - 1)):
        raise IntegrityError(
            f"reranker {reranker.name!r} returned scores out of order"
        )
    return [
        ScoredChunk(chunk=c.chunk, score=c.score, rank=i + 1)
        for i, c in enumerate(result)
    ], False


def save_index(index: VectorIndex, path: str | Path) -> None:
    """Write the index as JSON, atomically, with full float precision."""
    path = Path(path)
    payload = {
        "backend": index.backend_name,
        "dim": index.dim,
        "chunking": index.chunking,
        "items": [
            {
                "chunk_id": c.chunk_id,
                "doc_id": c.doc_id,
                "span": [c.start, c.end],
                "text": c.text,
                "vector": index.vectors[i].tolist(),
            }
            for i, c in enumerate(index.chunks)
        ],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_index(path: str | Path, expected_backend: Optional[str] = None) -> VectorIndex:
    """Load and validate an index file; refuses provenance mismatches."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise IntegrityError(f"index file {path} is unreadable or corrupt: {exc}") from exc

    backend = payload.get("backend")
    dim = payload.get("dim")
    chunking = payload.get("chunking")
    items = payload.get("items")
    if not backend or not isinstance(dim, int) or not chunking or items is None:
        raise IntegrityError(f"index file {path} is missing required fields")
    if expected_backend is not None and backend != expected_backend:
        raise ProvenanceError(
            f"index {path} was built with backend {backend!r}, "
            f"pipeline requests {expected_backend!r}"
        )

    chunks = []
    vectors = []
    for item in items:
        start, end = item["span"]
        chunk = Chunk(doc_id=item["doc_id"], start=start, end=end, text=item["text"])
        if chunk.chunk_id != item["chunk_id"]:
            raise IntegrityError(
                f"index item id {item['chunk_id']!r} does not match span-derived "
                f"{chunk.chunk_id!r}"
            )
        vec = item["vector"]
        if len(vec) != dim:
            raise IntegrityError(
                f"index item {chunk.chunk_id!r} has vector length {len(vec)}, dim {dim}"
            )
        chunks.append(chunk)
        vectors.append(vec)
    return VectorIndex(
        chunks=chunks,
        vectors=np.asarray(vectors, dtype=np.float64),
        backend_name=backend,
        chunking=chunking,
    )
