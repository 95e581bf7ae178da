"""Document chunking into contiguous character spans.

Two strategies: ``naive`` fixed-size slicing, and ``rcts`` (recursive
character text splitting) which splits on a separator hierarchy, recurses
into oversized pieces, and greedily merges adjacent pieces back together
while they fit. Separators stay attached to the preceding piece so that
chunk spans exactly partition ``[0, char_len)`` in both strategies.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .corpus import Document
from .errors import IntegrityError, ValidationError

DEFAULT_MAX_CHARS = 500
DEFAULT_SEPARATORS = ("\n\n", "\n", " ", "")


@dataclass(frozen=True)
class Chunk:
    """A contiguous character span of one document."""

    doc_id: str
    start: int
    end: int
    text: str

    def __post_init__(self):
        if self.end - self.start <= 0:
            raise IntegrityError(
                f"chunk span [{self.start}, {self.end}) in {self.doc_id!r} is empty"
            )
        if len(self.text) != self.end - self.start:
            raise IntegrityError(
                f"chunk text length {len(self.text)} does not match span "
                f"[{self.start}, {self.end}) in {self.doc_id!r}"
            )

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    @property
    def length(self) -> int:
        return self.end - self.start

    @property
    def chunk_id(self) -> str:
        return f"{self.doc_id}:{self.start}-{self.end}"


@dataclass(frozen=True)
class ChunkingConfig:
    strategy: str = "rcts"
    max_chars: int = DEFAULT_MAX_CHARS
    separators: tuple[str, ...] = DEFAULT_SEPARATORS

    def __post_init__(self):
        if self.strategy not in ("naive", "rcts"):
            raise ValidationError(f"unknown chunking strategy {self.strategy!r}")
        if self.max_chars < 1:
            raise ValidationError("max_chars must be >= 1")
        if self.strategy == "rcts" and (not self.separators or self.separators[-1] != ""):
            raise ValidationError(
                "rcts separators must end with the empty string fallback"
            )

    @property
    def label(self) -> str:
        return f"{self.strategy}{self.max_chars}"

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "max_chars": self.max_chars,
            "separators": list(self.separators),
        }

    @staticmethod
    def from_dict(raw: dict) -> "ChunkingConfig":
        return ChunkingConfig(
            strategy=raw.get("strategy", "rcts"),
            max_chars=int(raw.get("max_chars", DEFAULT_MAX_CHARS)),
            separators=tuple(raw.get("separators", DEFAULT_SEPARATORS)),
        )


def _spans_to_chunks(doc: Document, spans: list[tuple[int, int]]) -> list[Chunk]:
    return [
        Chunk(doc_id=doc.doc_id, start=s, end=e, text=doc.text[s:e]) for s, e in spans
    ]


def chunk_naive(doc: Document, max_chars: int = DEFAULT_MAX_CHARS) -> list[Chunk]:
    """Consecutive spans of exactly ``max_chars``, shorter final remainder."""
    if max_chars < 1:
        raise ValidationError("max_chars must be >= 1")
    n = doc.char_len
    spans = [(s, min(s + max_chars, n)) for s in range(0, n, max_chars)]
    return _spans_to_chunks(doc, spans)


def _fixed_spans(lo: int, hi: int, max_chars: int) -> list[tuple[int, int]]:
    return [(s, min(s + max_chars, hi)) for s in range(lo, hi, max_chars)]


def _merge_adjacent(
    spans: list[tuple[int, int]], max_chars: int
) -> list[tuple[int, int]]:
    merged = [spans[0]]
    for s, e in spans[1:]:
        ms, me = merged[-1]
        if e - ms <= max_chars and me == s:
            merged[-1] = (ms, e)
        else:
            merged.append((s, e))
    return merged


def _rcts_spans(
    text: str, lo: int, hi: int, separators: tuple[str, ...], max_chars: int
) -> list[tuple[int, int]]:
    if hi - lo <= max_chars:
        return [(lo, hi)]

    window = text[lo:hi]
    sep = ""
    rest: tuple[str, ...] = ("",)
    for i, candidate in enumerate(separators):
        if candidate == "" or candidate in window:
            sep = candidate
            rest = separators[i + 1 :] or ("",)
            break

    if sep == "":
        return _fixed_spans(lo, hi, max_chars)

    # split at every separator occurrence, separator kept with the
    # preceding piece so the spans stay a partition
    pieces: list[tuple[int, int]] = []
    cursor = lo
    for m in re.finditer(re.escape(sep), window):
        end = lo + m.end()
        if end > cursor:
            pieces.append((cursor, end))
            cursor = end
    if cursor < hi:
        pieces.append((cursor, hi))

    out: list[tuple[int, int]] = []
    for s, e in pieces:
        if e - s > max_chars:
            out.extend(_rcts_spans(text, s, e, rest, max_chars))
        else:
            out.append((s, e))
    return _merge_adjacent(out, max_chars)


def chunk_rcts(doc: Document, cfg: ChunkingConfig) -> list[Chunk]:
    """Recursive character split along ``cfg.separators``."""
    if cfg.strategy != "rcts":
        raise ValidationError("chunk_rcts requires an rcts ChunkingConfig")
    if doc.char_len == 0:
        return []
    spans = _rcts_spans(doc.text, 0, doc.char_len, cfg.separators, cfg.max_chars)
    return _spans_to_chunks(doc, spans)


def chunk_document(doc: Document, cfg: ChunkingConfig) -> list[Chunk]:
    if cfg.strategy == "naive":
        return chunk_naive(doc, cfg.max_chars)
    return chunk_rcts(doc, cfg)
