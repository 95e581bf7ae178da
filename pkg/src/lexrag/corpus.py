"""Corpus and QA-benchmark storage.

A corpus is a directory tree of plain-text files; documents are addressed
by their path relative to the corpus root. Benchmarks link queries to
ground-truth snippets given as (file_path, [start, end)) character spans,
optionally with the exact quote, and are validated against the corpus on
load. ``sample_mini`` builds balanced per-domain subsets that keep the
number of distinct documents small.

All spans are half-open intervals over Unicode code points, not bytes.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

from .errors import CorpusLoadError, IntegrityError, SamplingError, ValidationError

logger = logging.getLogger(__name__)

# Exhaustive doc-minimisation is used below this many candidate subsets;
# larger pools fall back to greedy selection.
_EXACT_SAMPLING_LIMIT = 150_000


@dataclass(frozen=True)
class Document:
    """One corpus file: an id (relative path) plus its full text."""

    doc_id: str
    text: str

    def __post_init__(self):
        if not self.doc_id:
            raise IntegrityError("document id must be non-empty")
        if not self.text:
            raise IntegrityError(f"document {self.doc_id!r} has empty text")

    @property
    def char_len(self) -> int:
        return len(self.text)


class Corpus:
    """Immutable, ordered collection of documents with id lookup."""

    def __init__(self, documents: Iterable[Document]):
        self.documents: list[Document] = list(documents)
        self._by_id: dict[str, Document] = {}
        for doc in self.documents:
            if doc.doc_id in self._by_id:
                raise IntegrityError(f"duplicate doc_id {doc.doc_id!r} in corpus")
            self._by_id[doc.doc_id] = doc

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def get(self, doc_id: str) -> Document:
        try:
            return self._by_id[doc_id]
        except KeyError:
            raise IntegrityError(f"unknown doc_id {doc_id!r}") from None

    @property
    def doc_ids(self) -> list[str]:
        return [d.doc_id for d in self.documents]


@dataclass(frozen=True)
class GroundTruthSnippet:
    """A ground-truth answer span inside one document."""

    doc_id: str
    start: int
    end: int
    quote: str

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise IntegrityError(
                f"snippet span [{self.start}, {self.end}) in {self.doc_id!r} is not a "
                "valid half-open interval"
            )

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class QAPair:
    """A benchmark query with its ground-truth snippets."""

    qa_id: str
    query: str
    snippets: tuple[GroundTruthSnippet, ...]
    domain: str

    def __post_init__(self):
        if not self.snippets:
            raise IntegrityError(f"QA pair {self.qa_id!r} has no snippets")

    @property
    def doc_ids(self) -> frozenset[str]:
        return frozenset(s.doc_id for s in self.snippets)


@dataclass
class BenchmarkSubset:
    """Balanced per-domain benchmark sample over a minimal document set."""

    qa_pairs: list[QAPair]
    selected_docs: frozenset[str]
    per_domain_count: dict[str, int] = field(default_factory=dict)


def load_corpus(root: str | Path) -> Corpus:
    """Load every text file under ``root`` as one document.

    Document ids are slash-separated paths relative to the root, ordered
    lexicographically. Hidden files (leading dot) and empty files are
    skipped with a warning; undecodable or unreadable files abort the load.
    """
    root = Path(root)
    if not root.is_dir():
        raise CorpusLoadError(f"corpus root {root} is not a directory")

    documents = []
    paths = sorted(
        (p for p in root.rglob("*") if p.is_file()),
        key=lambda p: p.relative_to(root).as_posix(),
    )
    for path in paths:
        rel = path.relative_to(root).as_posix()
        if any(part.startswith(".") for part in Path(rel).parts):
            logger.debug("skipping hidden file %s", rel)
            continue
        try:
            text = path.read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusLoadError(f"file {rel!r} is not valid UTF-8 text: {exc}") from exc
        except OSError as exc:
            raise CorpusLoadError(f"cannot read file {rel!r}: {exc}") from exc
        if not text:
            logger.warning("skipping empty file %s", rel)
            continue
        documents.append(Document(doc_id=rel, text=text))

    if not documents:
        logger.warning("corpus at %s contains no documents", root)
    return Corpus(documents)


def _qa_id(domain: str, query: str, snippets: Sequence[GroundTruthSnippet]) -> str:
    payload = "\x1f".join(
        [domain, query] + [f"{s.doc_id}:{s.start}-{s.end}" for s in snippets]
    )
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:12]


def load_benchmark(
    path: str | Path,
    corpus: Corpus,
    domain: Optional[str] = None,
) -> list[QAPair]:
    """Load and validate a benchmark file against a corpus.

    The file holds ``{"tests": [{"query", "snippets": [{"file_path",
    "span": [s, e]}]}]}``. Snippets may carry the quote under ``answer``
    (or ``quote``); when present it must equal the document substring at
    the span, otherwise the quote is derived from the document. A per-test
    ``domain`` key is honoured; the ``domain`` argument overrides it, and
    the file stem is the fallback label.
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read benchmark file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"benchmark file {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or "tests" not in payload:
        raise ValidationError(f"benchmark file {path} lacks a top-level 'tests' list")

    pairs: list[QAPair] = []
    seen_ids: dict[str, int] = {}
    for i, test in enumerate(payload["tests"]):
        query = test.get("query")
        if not query or not isinstance(query, str):
            raise ValidationError(f"benchmark test #{i} has no query text")
        label = domain or test.get("domain") or path.stem

        snippets = []
        for raw in test.get("snippets", []):
            doc_id = raw.get("file_path")
            span = raw.get("span")
            if doc_id is None or not (isinstance(span, (list, tuple)) and len(span) == 2):
                raise ValidationError(
                    f"benchmark test #{i} has a malformed snippet: {raw!r}"
                )
            start, end = int(span[0]), int(span[1])
            doc = corpus.get(doc_id)
            if not (0 <= start < end <= doc.char_len):
                raise IntegrityError(
                    f"snippet span [{start}, {end}) out of bounds for {doc_id!r} "
                    f"(char_len {doc.char_len})"
                )
            derived = doc.text[start:end]
            stated = raw.get("answer", raw.get("quote"))
            if stated is not None and stated != derived:
                raise IntegrityError(
                    f"snippet quote mismatch in {doc_id!r} at [{start}, {end}): "
                    f"stated {stated!r} but document has {derived!r}"
                )
            snippets.append(
                GroundTruthSnippet(doc_id=doc_id, start=start, end=end, quote=derived)
            )
        if not snippets:
            raise ValidationError(f"benchmark test #{i} has no snippets")

        qa_id = _qa_id(label, query, snippets)
        if qa_id in seen_ids:
            seen_ids[qa_id] += 1
            qa_id = f"{qa_id}-{seen_ids[qa_id]}"
        else:
            seen_ids[qa_id] = 1
        pairs.append(QAPair(qa_id=qa_id, query=query, snippets=tuple(snippets), domain=label))

    logger.info("loaded %d QA pairs from %s", len(pairs), path)
    return pairs


def load_benchmarks(
    paths: Sequence[str | Path], corpus: Corpus, domain: Optional[str] = None
) -> list[QAPair]:
    """Load and concatenate several benchmark files."""
    pairs: list[QAPair] = []
    for p in paths:
        pairs.extend(load_benchmark(p, corpus, domain=domain))
    return pairs


def write_benchmark(qa_pairs: Sequence[QAPair], path: str | Path) -> None:
    """Write QA pairs back out in the benchmark file schema."""
    tests = [
        {
            "query": qa.query,
            "domain": qa.domain,
            "snippets": [
                {"file_path": s.doc_id, "span": [s.start, s.end], "answer": s.quote}
                for s in qa.snippets
            ],
        }
        for qa in qa_pairs
    ]
    Path(path).write_text(
        json.dumps({"tests": tests}, indent=1, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def _select_exact(pool: list[QAPair], count: int) -> list[int]:
    """Enumerate all ``count``-subsets and return the doc-minimal one."""
    best_docs = None
    best_combo = None
    for combo in itertools.combinations(range(len(pool)), count):
        docs = frozenset().union(*(pool[i].doc_ids for i in combo))
        if best_docs is None or len(docs) < len(best_docs):
            best_docs, best_combo = docs, combo
    assert best_combo is not None
    return list(best_combo)


def _select_greedy(pool: list[QAPair], count: int) -> list[int]:
    """Set-cover style greedy pick: cheapest new-document cost first,
    preferring pairs whose documents are shared by many other pairs."""
    doc_uses: dict[str, int] = {}
    for qa in pool:
        for d in qa.doc_ids:
            doc_uses[d] = doc_uses.get(d, 0) + 1

    selected: list[int] = []
    selected_docs: set[str] = set()
    remaining = list(range(len(pool)))
    while len(selected) < count:
        def cost(i: int) -> tuple[int, int, int]:
            new = pool[i].doc_ids - selected_docs
            popularity = sum(doc_uses[d] for d in pool[i].doc_ids)
            return (len(new), -popularity, i)

        pick = min(remaining, key=cost)
        remaining.remove(pick)
        selected.append(pick)
        selected_docs.update(pool[pick].doc_ids)
    return selected


def sample_mini(
    qa_pairs: Sequence[QAPair], per_domain: int, seed: int
) -> BenchmarkSubset:
    """Sample ``per_domain`` unique QA pairs per domain over few documents.

    Small pools are minimised exactly by enumeration; large pools use a
    greedy pass that repeatedly prefers pairs whose snippet documents are
    already selected. The result is deterministic for a given seed.
    """
    if per_domain < 1:
        raise ValidationError("per_domain must be >= 1")

    by_domain: dict[str, list[QAPair]] = {}
    for qa in qa_pairs:
        by_domain.setdefault(qa.domain, []).append(qa)

    chosen: list[QAPair] = []
    selected_docs: set[str] = set()
    per_domain_count: dict[str, int] = {}
    for domain in sorted(by_domain):
        group = by_domain[domain]
        if len(group) < per_domain:
            raise SamplingError(
                f"domain {domain!r} has only {len(group)} QA pairs, need {per_domain}"
            )
        order = list(range(len(group)))
        random.Random(f"{seed}:{domain}").shuffle(order)
        pool = [group[i] for i in order]

        if math.comb(len(pool), per_domain) <= _EXACT_SAMPLING_LIMIT:
            picked = _select_exact(pool, per_domain)
        else:
            picked = _select_greedy(pool, per_domain)

        # report in original benchmark order for stable output
        original = sorted(order[i] for i in picked)
        domain_pairs = [group[i] for i in original]
        chosen.extend(domain_pairs)
        for qa in domain_pairs:
            selected_docs.update(qa.doc_ids)
        per_domain_count[domain] = len(domain_pairs)

    return BenchmarkSubset(
        qa_pairs=chosen,
        selected_docs=frozenset(selected_docs),
        per_domain_count=per_domain_count,
    )
