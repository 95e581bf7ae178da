"""Embedding backends behind a single interface.

Two built-ins: a deterministic hashed character-n-gram embedder for
offline runs and tests, and an HTTP client speaking the common
embeddings wire format ``POST {"model", "input": [...]}`` returning
``{"data": [{"embedding": [...]}]}``, so any compatible server (SBERT,
GTE, or otherwise) plugs in via configuration.

Token-level variants of both exist for metrics that need one vector per
token. Vector dtype is float64 throughout.
"""

from __future__ import annotations

import hashlib
import logging
import os
import re
from abc import ABC, abstractmethod
from typing import Optional, Sequence

import numpy as np

from ._http import post_json
from .errors import IntegrityError, ValidationError

logger = logging.getLogger(__name__)

_WORD_RE = re.compile(r"[a-z0-9]+")


def tokenize_words(text: str) -> list[str]:
    """Lowercase, strip punctuation, whitespace-ish split."""
    return _WORD_RE.findall(text.lower())


class EmbeddingBackend(ABC):
    """Maps texts to fixed-dimension vectors, deterministically per backend."""

    name: str
    dim: int
    batch_size: int = 64

    @abstractmethod
    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """Embed one batch; returns a (len(texts), dim) matrix."""

    def embed_one(self, text: str) -> np.ndarray:
        return embed_batch(self, [text])[0]


def embed_batch(backend: EmbeddingBackend, texts: Sequence[str]) -> np.ndarray:
    """Embed ``texts`` through ``backend`` in batches.

    The result is independent of the backend's batch size: one row per
    input, in input order.
    """
    if len(texts) == 0:
        raise ValidationError("embed_batch requires at least one text")
    size = max(1, backend.batch_size)
    rows = []
    for i in range(0, len(texts), size):
        block = backend.embed(texts[i : i + size])
        block = np.asarray(block, dtype=np.float64)
        if block.ndim != 2 or block.shape[0] != len(texts[i : i + size]):
            raise IntegrityError(
                f"backend {backend.name!r} returned shape {block.shape} for a "
                f"batch of {len(texts[i:i + size])}"
            )
        if block.shape[1] != backend.dim:
            raise IntegrityError(
                f"backend {backend.name!r} returned dim {block.shape[1]}, "
                f"expected {backend.dim}"
            )
        rows.append(block)
    matrix = np.vstack(rows)
    if not np.all(np.isfinite(matrix)):
        raise IntegrityError(f"backend {backend.name!r} returned non-finite values")
    return matrix


def _signed_bucket(token: str, dim: int) -> tuple[int, float]:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "big")
    sign = 1.0 if (value >> 63) & 1 else -1.0
    return value % dim, sign


class HashedNgramBackend(EmbeddingBackend):
    """Deterministic character-n-gram embedder (signed hashing trick).

    Text is lowercased, whitespace-collapsed and padded with one space on
    each side; every character n-gram adds +-1 to a hashed bucket and the
    result is L2-normalised. The empty text maps to the zero vector.
    """

    def __init__(self, dim: int = 256, ngram: int = 3, name: Optional[str] = None):
        if dim < 1 or ngram < 1:
            raise ValidationError("dim and ngram must be >= 1")
        self.dim = dim
        self.ngram = ngram
        self.name = name or f"hash-ngram{ngram}-{dim}"

    def _vector(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        normalized = " ".join(text.lower().split())
        if not normalized:
            return vec
        padded = f" {normalized} "
        n = self.ngram
        if len(padded) < n:
            padded = padded.ljust(n)
        for i in range(len(padded) - n + 1):
            bucket, sign = _signed_bucket(padded[i : i + n], self.dim)
            vec[bucket] += sign
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self._vector(t) for t in texts]) if texts else np.zeros((0, self.dim))


class HTTPEmbeddingBackend(EmbeddingBackend):
    """Client for an embeddings endpoint speaking the common JSON shape.

    The bearer token is read from the environment variable named by
    ``api_key_env``. Transport failures are retried with exponential
    backoff before raising :class:`TransportError`.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        dim: int,
        api_key_env: str = "LEXRAG_EMBED_TOKEN",
        batch_size: int = 64,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 0.5,
    ):
        self.endpoint = endpoint
        self.name = model
        self.dim = dim
        self.api_key_env = api_key_env
        self.batch_size = batch_size
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.api_key_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _post(self, payload: dict) -> dict:
        return post_json(
            self.endpoint,
            payload,
            headers=self._headers(),
            timeout=self.timeout,
            max_retries=self.max_retries,
            backoff=self.backoff,
            what="embedding endpoint",
        )

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        payload = {"model": self.name, "input": list(texts)}
        body = self._post(payload)
        try:
            data = body["data"]
            if any("index" in item for item in data):
                data = sorted(data, key=lambda item: item.get("index", 0))
            matrix = np.asarray([item["embedding"] for item in data], dtype=np.float64)
        except (KeyError, TypeError) as exc:
            raise IntegrityError(
                f"embedding endpoint {self.endpoint} returned a malformed body: {exc}"
            ) from exc
        return matrix


class TokenEmbeddingBackend(ABC):
    """Per-token embeddings for token-matching metrics."""

    name: str
    dim: int

    @abstractmethod
    def embed_tokens(self, text: str) -> tuple[list[str], np.ndarray]:
        """Return (tokens, matrix of one vector per token)."""


class HashedTokenBackend(TokenEmbeddingBackend):
    """Deterministic per-token embedder reusing the hashed n-gram scheme."""

    def __init__(self, dim: int = 64, ngram: int = 3, name: Optional[str] = None):
        self._inner = HashedNgramBackend(dim=dim, ngram=ngram)
        self.dim = dim
        self.name = name or f"hash-token{ngram}-{dim}"

    def embed_tokens(self, text: str) -> tuple[list[str], np.ndarray]:
        tokens = tokenize_words(text)
        if not tokens:
            return [], np.zeros((0, self.dim), dtype=np.float64)
        return tokens, np.stack([self._inner._vector(t) for t in tokens])


class HTTPTokenBackend(TokenEmbeddingBackend):
    """Token-level variant of the embeddings wire contract.

    Request adds ``"granularity": "token"``; the response carries
    ``{"data": [{"tokens": [...], "embeddings": [[...], ...]}]}``.
    """

    def __init__(self, endpoint: str, model: str, dim: int, **kwargs):
        self._http = HTTPEmbeddingBackend(endpoint, model, dim, **kwargs)
        self.name = model
        self.dim = dim

    def embed_tokens(self, text: str) -> tuple[list[str], np.ndarray]:
        body = self._http._post(
            {"model": self.name, "input": [text], "granularity": "token"}
        )
        try:
            entry = body["data"][0]
            tokens = list(entry["tokens"])
            matrix = np.asarray(entry["embeddings"], dtype=np.float64)
        except (KeyError, IndexError, TypeError) as exc:
            raise IntegrityError(
                f"token embedding endpoint returned a malformed body: {exc}"
            ) from exc
        if matrix.shape != (len(tokens), self.dim):
            raise IntegrityError(
                f"token embedding shape {matrix.shape} does not match "
                f"{len(tokens)} tokens x dim {self.dim}"
            )
        return tokens, matrix


def backend_from_config(raw: dict) -> EmbeddingBackend:
    """Build an embedding backend from its config mapping."""
    kind = raw.get("kind", "hashed_ngram")
    if kind == "hashed_ngram":
        return HashedNgramBackend(
            dim=int(raw.get("dim", 256)),
            ngram=int(raw.get("ngram", 3)),
            name=raw.get("name"),
        )
    if kind == "http":
        for key in ("endpoint", "model", "dim"):
            if key not in raw:
                raise ValidationError(f"http embedding backend config needs {key!r}")
        return HTTPEmbeddingBackend(
            endpoint=raw["endpoint"],
            model=raw["model"],
            dim=int(raw["dim"]),
            api_key_env=raw.get("api_key_env", "LEXRAG_EMBED_TOKEN"),
            batch_size=int(raw.get("batch_size", 64)),
            timeout=float(raw.get("timeout", 30.0)),
            max_retries=int(raw.get("max_retries", 3)),
            backoff=float(raw.get("backoff", 0.5)),
        )
    raise ValidationError(f"unknown embedding backend kind {kind!r}")


def token_backend_from_config(raw: dict) -> TokenEmbeddingBackend:
    kind = raw.get("kind", "hashed_token")
    if kind == "hashed_token":
        return HashedTokenBackend(
            dim=int(raw.get("dim", 64)),
            ngram=int(raw.get("ngram", 3)),
            name=raw.get("name"),
        )
    if kind == "http":
        for key in ("endpoint", "model", "dim"):
            if key not in raw:
                raise ValidationError(f"http token backend config needs {key!r}")
        return HTTPTokenBackend(
            endpoint=raw["endpoint"], model=raw["model"], dim=int(raw["dim"])
        )
    raise ValidationError(f"unknown token backend kind {kind!r}")
