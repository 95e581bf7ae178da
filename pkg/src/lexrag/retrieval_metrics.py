"""Span-overlap Precision@K / Recall@K and retrieval-run evaluation.

Both metrics count characters, the same unit ground-truth spans are
annotated in. To avoid double counting, the opposite side of each ratio
is unioned per document first: precision overlaps each retrieved chunk
against the union of truth spans, recall covers each truth span with the
union of retrieved chunks. Averages are macro (per query), then grouped
per domain and overall.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .chunking import Chunk
from .corpus import GroundTruthSnippet, QAPair
from .embedding import EmbeddingBackend, embed_batch
from .errors import ValidationError
from .index import ScoredChunk

logger = logging.getLogger(__name__)

Interval = tuple[int, int]


def span_overlap(a: Interval, b: Interval) -> int:
    """Character overlap of two half-open intervals in the same document."""
    return max(0, min(a[1], b[1]) - max(a[0], b[0]))


def _merge_intervals(intervals: Iterable[Interval]) -> list[Interval]:
    merged: list[Interval] = []
    for start, end in sorted(intervals):
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def _union_by_doc(items: Iterable[tuple[str, Interval]]) -> dict[str, list[Interval]]:
    by_doc: dict[str, list[Interval]] = {}
    for doc_id, interval in items:
        by_doc.setdefault(doc_id, []).append(interval)
    return {doc_id: _merge_intervals(spans) for doc_id, spans in by_doc.items()}


def precision_at_k(
    retrieved: Sequence[Chunk], truth: Sequence[GroundTruthSnippet]
) -> float:
    """Overlapping characters over retrieved characters.

    ``retrieved`` is the already-sliced top-k list. Truth spans are
    unioned per document before overlapping, so a chunk can never earn
    credit twice for the same truth character.
    """
    if not retrieved:
        raise ValidationError("precision needs at least one retrieved chunk")
    truth_union = _union_by_doc((s.doc_id, s.span) for s in truth)
    overlap = 0
    total = 0
    for chunk in retrieved:
        total += chunk.end - chunk.start
        for interval in truth_union.get(chunk.doc_id, ()):
            overlap += span_overlap((chunk.start, chunk.end), interval)
    return overlap / total


def recall_at_k(
    retrieved: Sequence[Chunk], truth: Sequence[GroundTruthSnippet]
) -> float:
    """Covered truth characters over total truth characters.

    Retrieved chunks are unioned per document before coverage is
    counted; each truth span contributes its own length to the
    denominator.
    """
    total = sum(s.length for s in truth)
    if total == 0:
        raise ValidationError("ground truth has zero total span length")
    retrieved_union = _union_by_doc((c.doc_id, (c.start, c.end)) for c in retrieved)
    covered = 0
    for snippet in truth:
        for interval in retrieved_union.get(snippet.doc_id, ()):
            covered += span_overlap(snippet.span, interval)
    return covered / total


@dataclass(frozen=True)
class VariantLabels:
    """Complete description of how a retrieval run was produced."""

    chunking: str
    backend: str
    similarity: str
    reranked: bool
    translation: bool

    def __post_init__(self):
        for name in ("chunking", "backend", "similarity"):
            if not getattr(self, name):
                raise ValidationError(f"variant label {name!r} is empty")

    @property
    def label(self) -> str:
        return "__".join(
            [
                self.chunking,
                self.backend,
                self.similarity,
                "reranked" if self.reranked else "unranked",
                "translated" if self.translation else "plain",
            ]
        )

    def to_dict(self) -> dict:
        return {
            "chunking": self.chunking,
            "backend": self.backend,
            "similarity": self.similarity,
            "reranked": self.reranked,
            "translation": self.translation,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "VariantLabels":
        return cls(
            chunking=raw["chunking"],
            backend=raw["backend"],
            similarity=raw["similarity"],
            reranked=bool(raw["reranked"]),
            translation=bool(raw["translation"]),
        )


@dataclass(frozen=True)
class RetrievalRun:
    """Ranked results for every benchmark query under one variant."""

    variant: VariantLabels
    results: dict[str, tuple[ScoredChunk, ...]]

    def __post_init__(self):
        for qa_id, scored in self.results.items():
            ranks = [s.rank for s in scored]
            if ranks != list(range(1, len(scored) + 1)):
                raise ValidationError(
                    f"result list for {qa_id!r} has inconsistent ranks {ranks[:5]}…"
                )

    def chunks_for(self, qa_id: str, k: int) -> list[Chunk]:
        return [s.chunk for s in self.results[qa_id][:k]]


@dataclass(frozen=True)
class PRPoint:
    precision: float
    recall: float
    n_queries: int


@dataclass(frozen=True)
class PRCurve:
    """Precision/recall per k, overall and per domain."""

    variant: VariantLabels
    ks: tuple[int, ...]
    overall: dict[int, PRPoint]
    per_domain: dict[str, dict[int, PRPoint]]
    skipped: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        def points(mapping: dict[int, PRPoint]) -> dict:
            return {
                str(k): {
                    "precision": p.precision,
                    "recall": p.recall,
                    "n_queries": p.n_queries,
                }
                for k, p in sorted(mapping.items())
            }

        return {
            "variant": self.variant.to_dict(),
            "ks": list(self.ks),
            "overall": points(self.overall),
            "per_domain": {
                domain: points(m) for domain, m in sorted(self.per_domain.items())
            },
            "skipped": list(self.skipped),
        }

    def render_table(self) -> str:
        """Delimiter-separated, plot-ready long-form table."""
        lines = ["variant,domain,k,precision,recall,n_queries"]
        scopes = [("overall", self.overall)]
        scopes += sorted(self.per_domain.items())
        for domain, mapping in scopes:
            for k in self.ks:
                point = mapping[k]
                lines.append(
                    f"{self.variant.label},{domain},{k},"
                    f"{point.precision:.6f},{point.recall:.6f},{point.n_queries}"
                )
        return "\n".join(lines) + "\n"


def evaluate_run(
    run: RetrievalRun, benchmark: Sequence[QAPair], ks: Sequence[int]
) -> PRCurve:
    """Macro-averaged PR curve for a run against ground truth.

    Every benchmark query must be present in the run. Queries with zero
    total truth length are skipped with a warning. Result lists shorter
    than k are scored over what they have, so file-scoped runs with few
    chunks in the matched document still evaluate.
    """
    if not benchmark:
        raise ValidationError("benchmark is empty")
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise ValidationError("ks must be a non-empty list of counts >= 1")

    missing = [qa.qa_id for qa in benchmark if qa.qa_id not in run.results]
    if missing:
        raise ValidationError(
            f"run is missing {len(missing)} benchmark queries: "
            + ", ".join(missing[:10])
            + ("…" if len(missing) > 10 else "")
        )

    skipped = []
    per_query: dict[str, dict[int, tuple[float, float]]] = {}
    domains: dict[str, list[str]] = {}
    for qa in benchmark:
        if sum(s.length for s in qa.snippets) == 0:
            logger.warning("query %s has zero truth length; excluded", qa.qa_id)
            skipped.append(qa.qa_id)
            continue
        scored = run.results[qa.qa_id]
        if len(scored) < ks[-1]:
            logger.debug(
                "query %s has %d results for max k %d; scoring available depth",
                qa.qa_id, len(scored), ks[-1],
            )
        scores = {}
        for k in ks:
            top = [s.chunk for s in scored[: min(k, len(scored))]]
            if not top:
                scores[k] = (0.0, 0.0)
                continue
            scores[k] = (precision_at_k(top, qa.snippets), recall_at_k(top, qa.snippets))
        per_query[qa.qa_id] = scores
        domains.setdefault(qa.domain, []).append(qa.qa_id)

    if not per_query:
        raise ValidationError("no scorable queries in benchmark")

    def macro(qa_ids: Sequence[str]) -> dict[int, PRPoint]:
        points = {}
        for k in ks:
            ps = [per_query[q][k][0] for q in qa_ids]
            rs = [per_query[q][k][1] for q in qa_ids]
            points[k] = PRPoint(
                precision=sum(ps) / len(ps),
                recall=sum(rs) / len(rs),
                n_queries=len(qa_ids),
            )
        return points

    return PRCurve(
        variant=run.variant,
        ks=tuple(ks),
        overall=macro(list(per_query)),
        per_domain={d: macro(ids) for d, ids in domains.items()},
        skipped=tuple(skipped),
    )


def text_similarity_check(
    retrieved: Sequence[Chunk],
    truth: Sequence[GroundTruthSnippet],
    backend: EmbeddingBackend,
) -> float:
    """Mean over truth snippets of best cosine match among retrieved texts.

    A sanity metric next to the span scores: high span recall with low
    text similarity (or vice versa) points at annotation or chunking
    artifacts. Empty retrieval scores 0.
    """
    if not truth:
        raise ValidationError("text similarity needs at least one truth snippet")
    if not retrieved:
        return 0.0
    matrix = embed_batch(
        backend, [s.quote for s in truth] + [c.text for c in retrieved]
    )
    truth_vecs, chunk_vecs = matrix[: len(truth)], matrix[len(truth) :]
    chunk_norms = np.linalg.norm(chunk_vecs, axis=1)
    best_sims = []
    for vec in truth_vecs:
        norm = float(np.linalg.norm(vec))
        best = 0.0
        for cvec, cnorm in zip(chunk_vecs, chunk_norms):
            denom = norm * float(cnorm)
            sim = float(cvec @ vec / denom) if denom > 0 else 0.0
            best = max(best, sim)
        best_sims.append(best)
    return float(sum(best_sims) / len(best_sims))
