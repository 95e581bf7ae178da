"""Query translation: reference extraction, file matching, and routing labels.

A raw benchmark query like ``"Consider the NDA between X and Y; does it
permit …?"`` carries two payloads: which document to look in and what to
ask of it. This module pulls them apart, resolves the reference to a
corpus file by embedding similarity against a per-domain threshold, and
labels the question by readability (expert / non-expert) and specificity
(vague / verbose) so retrieval depth can adapt per query.
"""

from __future__ import annotations

import logging
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional

import numpy as np

from ._http import post_json
from .corpus import Corpus
from .embedding import EmbeddingBackend, embed_batch
from .errors import IntegrityError, TransportError, ValidationError

logger = logging.getLogger(__name__)

EXPERT = "expert"
NON_EXPERT = "non_expert"
VAGUE = "vague"
VERBOSE = "verbose"

EXPERT_READABILITY_CUTOFF = 8.0

# Dale-Chall constants: unfamiliar-word weight, sentence-length weight,
# and the adjustment added when unfamiliar words exceed 5%.
_DC_WORD_WEIGHT = 0.1579
_DC_ASL_WEIGHT = 0.0496
_DC_ADJUSTMENT = 3.6365

# Lowercase words that may join two capitalized spans into one entity
# ("Agreement between X and Y") but never start or end one.
_CONNECTIVES = {"between", "and", "of", "the", "for", "to", "in", "by", "&"}

_EDGE_PUNCT = "\"'“”‘’()[],;:!?…"

_DEFAULT_THRESHOLD = 0.3


def _data_text(filename: str) -> str:
    return resources.files("lexrag.data").joinpath(filename).read_text(encoding="utf-8")


def _parse_word_file(raw: str) -> frozenset[str]:
    words = set()
    for line in raw.splitlines():
        line = line.split("#", 1)[0]
        words.update(w.lower() for w in line.split())
    return frozenset(words)


@lru_cache(maxsize=None)
def load_stopwords() -> frozenset[str]:
    """Bundled English stopword list (lowercased)."""
    return _parse_word_file(_data_text("stopwords.txt"))


@lru_cache(maxsize=None)
def load_familiar_words() -> frozenset[str]:
    """Bundled everyday-word list backing the readability formula."""
    return _parse_word_file(_data_text("dale_chall_familiar.txt"))


@dataclass(frozen=True)
class ExtractedQuery:
    """Result of splitting a raw query into reference and question."""

    doc_reference: Optional[str]
    question: str


def _strip_edges(token: str) -> str:
    return token.strip(_EDGE_PUNCT)


def simple_extract(query: str, stopwords: Optional[frozenset[str]] = None) -> ExtractedQuery:
    """Split at the first semicolon; stopword-filter the reference side.

    Without a semicolon the whole query is the question and there is no
    document reference. The question side is never altered beyond
    trimming whitespace.
    """
    if not query.strip():
        raise ValidationError("query is empty")
    if ";" not in query:
        return ExtractedQuery(doc_reference=None, question=query.strip())
    stopwords = stopwords if stopwords is not None else load_stopwords()
    head, _, tail = query.partition(";")
    kept = []
    for token in head.split():
        bare = _strip_edges(token)
        if not bare or bare.lower() in stopwords:
            continue
        kept.append(bare)
    reference = " ".join(kept)
    return ExtractedQuery(
        doc_reference=reference if reference else None,
        question=tail.strip(),
    )


class EntityExtractor(ABC):
    """Pulls a document reference out of a query, if one is present."""

    @abstractmethod
    def extract(self, query: str) -> Optional[str]: ...


class HeuristicEntityExtractor(EntityExtractor):
    """Longest run of capitalized spans, joined by their connectives.

    Capitalized tokens whose lowercase form is a stopword (sentence
    openers like "In", "Review", "Consider") do not count as entity
    tokens, and connectives are kept only between entity tokens.
    A single capitalized word at the very start of the query is
    discarded as a false positive.
    """

    def __init__(self, stopwords: Optional[frozenset[str]] = None):
        self.stopwords = stopwords if stopwords is not None else load_stopwords()

    def _is_entity(self, bare: str) -> bool:
        return bool(bare) and bare[0].isupper() and bare.lower() not in self.stopwords

    def extract(self, query: str) -> Optional[str]:
        tokens = [(_strip_edges(t), i) for i, t in enumerate(query.split())]
        runs: list[list[tuple[str, int]]] = []
        current: list[tuple[str, int]] = []
        for bare, i in tokens:
            if self._is_entity(bare) or bare.lower() in _CONNECTIVES:
                current.append((bare, i))
            else:
                if current:
                    runs.append(current)
                current = []
        if current:
            runs.append(current)

        best: Optional[list[tuple[str, int]]] = None
        for run in runs:
            # trim connectives off both ends
            while run and run[0][0].lower() in _CONNECTIVES:
                run = run[1:]
            while run and run[-1][0].lower() in _CONNECTIVES:
                run = run[:-1]
            entity_count = sum(1 for bare, _ in run if self._is_entity(bare))
            if entity_count == 0:
                continue
            if entity_count == 1 and len(run) == 1 and run[0][1] == 0:
                continue  # lone sentence-initial capital
            if best is None or len(run) > len(best):
                best = run
        if best is None:
            return None
        return " ".join(bare for bare, _ in best)


class RemoteEntityExtractor(EntityExtractor):
    """NER service client; falls back to the heuristic when unreachable.

    Wire shape: ``POST {"text": <query>}`` returning
    ``{"reference": <string or null>}``.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 10.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        fallback: Optional[EntityExtractor] = None,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.fallback = fallback if fallback is not None else HeuristicEntityExtractor()

    def extract(self, query: str) -> Optional[str]:
        try:
            body = post_json(
                self.endpoint,
                {"text": query},
                timeout=self.timeout,
                max_retries=self.max_retries,
                backoff=self.backoff,
                what="entity extractor",
            )
        except TransportError as exc:
            logger.warning("remote entity extractor unavailable, using heuristic: %s", exc)
            return self.fallback.extract(query)
        if "reference" not in body:
            raise IntegrityError(
                f"entity extractor {self.endpoint} returned no 'reference' field"
            )
        reference = body["reference"]
        if reference is not None and not isinstance(reference, str):
            raise IntegrityError(
                f"entity extractor {self.endpoint} returned a non-string reference"
            )
        return reference if reference else None


_SEPARATOR_RE = re.compile(r"[/\\_\-.]+")
_SUFFIX_RE = re.compile(r"\.[A-Za-z0-9]{1,8}$")


def file_descriptor(doc_id: str) -> str:
    """Path-derived matching text: extension stripped, separators spaced."""
    return _SEPARATOR_RE.sub(" ", _SUFFIX_RE.sub("", doc_id)).strip()


@dataclass(frozen=True)
class FileMatch:
    """Best-matching corpus file for a reference, if above threshold."""

    matched_doc: Optional[str]
    similarity: float


def match_file(
    doc_reference: Optional[str],
    corpus: Corpus,
    backend: EmbeddingBackend,
    threshold: float,
) -> FileMatch:
    """Cosine-match a reference against file descriptors of the corpus.

    Returns the argmax document when its similarity clears the
    threshold, otherwise no match (similarity still reported). An empty
    reference matches nothing with similarity 0.
    """
    if len(corpus) == 0:
        raise ValidationError("cannot match against an empty corpus")
    if not (0.0 <= threshold <= 1.0):
        raise ValidationError(f"threshold {threshold} outside [0, 1]")
    if not doc_reference or not doc_reference.strip():
        return FileMatch(matched_doc=None, similarity=0.0)

    doc_ids = [doc.doc_id for doc in corpus]
    texts = [doc_reference] + [file_descriptor(d) for d in doc_ids]
    matrix = embed_batch(backend, texts)
    ref_vec, desc_vecs = matrix[0], matrix[1:]
    ref_norm = float(np.linalg.norm(ref_vec))

    best_doc, best_sim = None, -np.inf
    for doc_id, vec in sorted(zip(doc_ids, desc_vecs), key=lambda dv: dv[0]):
        denom = ref_norm * float(np.linalg.norm(vec))
        sim = float(vec @ ref_vec / denom) if denom > 0 else 0.0
        if sim > best_sim:
            best_doc, best_sim = doc_id, sim
    assert best_doc is not None
    if best_sim < threshold:
        return FileMatch(matched_doc=None, similarity=best_sim)
    return FileMatch(matched_doc=best_doc, similarity=best_sim)


def score_match(matched_doc: Optional[str], gold_doc: str) -> int:
    """+1 correct match, -1 wrong match, 0 no match (below threshold)."""
    if matched_doc is None:
        return 0
    return 1 if matched_doc == gold_doc else -1


@dataclass(frozen=True)
class ThresholdTable:
    """Per-domain similarity thresholds for file matching."""

    thresholds: dict[str, float]
    default: float = _DEFAULT_THRESHOLD

    def __post_init__(self):
        for domain, value in self.thresholds.items():
            if not (0.0 <= value <= 1.0):
                raise ValidationError(
                    f"threshold for {domain!r} is {value}, outside [0, 1]"
                )
        if not (0.0 <= self.default <= 1.0):
            raise ValidationError(f"default threshold {self.default} outside [0, 1]")
        object.__setattr__(
            self,
            "thresholds",
            {k.lower(): float(v) for k, v in self.thresholds.items()},
        )

    def for_domain(self, domain: Optional[str]) -> float:
        if domain is None:
            return self.default
        return self.thresholds.get(domain.lower(), self.default)


def default_thresholds() -> ThresholdTable:
    """The benchmark operating points: 0.3 except CUAD 0.55, MAUD 0.38."""
    return ThresholdTable(
        thresholds={
            "contractnli": 0.3,
            "cuad": 0.55,
            "maud": 0.38,
            "privacyqa": 0.3,
        },
        default=_DEFAULT_THRESHOLD,
    )


_ABBREVIATIONS = frozenset(
    {"inc", "no", "v", "vs", "etc", "mr", "mrs", "ms", "dr", "st", "co", "corp", "ltd", "llc"}
)

_WORD_TOKEN_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9'\-]*")


def _split_sentences(text: str) -> list[str]:
    """Split on .!? runs, guarding common abbreviations like "Inc."."""
    sentences = []
    start = 0
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in ".!?":
            j = i
            while j + 1 < len(text) and text[j + 1] in ".!?":
                j += 1
            if ch == ".":
                before = text[:i]
                match = re.search(r"([A-Za-z]+)$", before)
                if match and match.group(1).lower() in _ABBREVIATIONS:
                    i = j + 1
                    continue
            sentences.append(text[start : j + 1])
            start = j + 1
            i = j + 1
        else:
            i += 1
    if start < len(text):
        sentences.append(text[start:])
    return [s for s in sentences if _WORD_TOKEN_RE.search(s)]


def _words(text: str) -> list[str]:
    return _WORD_TOKEN_RE.findall(text)


def _is_familiar(word: str, familiar: frozenset[str]) -> bool:
    w = word.lower().strip("'-")
    if not w:
        return True
    if w.isdigit():
        return True
    if w.endswith("'s"):
        w = w[:-2]
    if w in familiar:
        return True
    if "-" in w:
        parts = [p for p in w.split("-") if p]
        return bool(parts) and all(p in familiar for p in parts)
    return False


def dale_chall(text: str, familiar: Optional[frozenset[str]] = None) -> float:
    """Dale-Chall readability: unfamiliar-word share plus sentence length.

    ``0.1579 * PDW + 0.0496 * ASL``, plus 3.6365 when unfamiliar words
    exceed 5%, where PDW is the percentage of words off the familiar
    list and ASL the average sentence length in words.
    """
    familiar = familiar if familiar is not None else load_familiar_words()
    words = _words(text)
    if not words:
        raise ValidationError("readability needs at least one word")
    sentences = _split_sentences(text)
    n_sentences = max(1, len(sentences))
    unfamiliar = sum(1 for w in words if not _is_familiar(w, familiar))
    pdw = 100.0 * unfamiliar / len(words)
    asl = len(words) / n_sentences
    score = _DC_WORD_WEIGHT * pdw + _DC_ASL_WEIGHT * asl
    if pdw > 5.0:
        score += _DC_ADJUSTMENT
    return score


def classify_expertise(readability: float) -> str:
    return EXPERT if readability >= EXPERT_READABILITY_CUTOFF else NON_EXPERT


class SpecificityClassifier(ABC):
    """Labels a query vague or verbose."""

    @abstractmethod
    def classify(self, query: str, has_matched_reference: bool = False) -> str: ...


class HeuristicSpecificityClassifier(SpecificityClassifier):
    """Length-and-structure heuristic default.

    Verbose when the query is long enough, or when it carries a matched
    document reference and enough clause delimiters to suggest a
    multi-part request; vague otherwise.
    """

    def __init__(self, threshold_words: int = 25, min_clause_delimiters: int = 2):
        if threshold_words < 1 or min_clause_delimiters < 0:
            raise ValidationError("nonsensical specificity thresholds")
        self.threshold_words = threshold_words
        self.min_clause_delimiters = min_clause_delimiters

    def classify(self, query: str, has_matched_reference: bool = False) -> str:
        n_words = len(_words(query))
        delimiters = sum(query.count(ch) for ch in ";,:")
        if n_words >= self.threshold_words:
            return VERBOSE
        if has_matched_reference and delimiters >= self.min_clause_delimiters:
            return VERBOSE
        return VAGUE


class RemoteSpecificityClassifier(SpecificityClassifier):
    """Trained-model service client with heuristic fallback.

    Wire shape: ``POST {"query": <text>}`` returning
    ``{"label": "vague" | "verbose"}``. The remote label wins whenever
    the service answers; transport failure falls back with a warning.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 10.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        fallback: Optional[SpecificityClassifier] = None,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.fallback = (
            fallback if fallback is not None else HeuristicSpecificityClassifier()
        )

    def classify(self, query: str, has_matched_reference: bool = False) -> str:
        try:
            body = post_json(
                self.endpoint,
                {"query": query},
                timeout=self.timeout,
                max_retries=self.max_retries,
                backoff=self.backoff,
                what="specificity classifier",
            )
        except TransportError as exc:
            logger.warning(
                "specificity classifier unavailable, using heuristic: %s", exc
            )
            return self.fallback.classify(query, has_matched_reference)
        label = body.get("label")
        if label not in (VAGUE, VERBOSE):
            raise IntegrityError(
                f"specificity classifier {self.endpoint} returned bad label {label!r}"
            )
        return label


@dataclass(frozen=True)
class KPolicy:
    """How many chunks to retrieve per (expertise, specificity) cell."""

    non_expert_k: int = 5
    expert_k: int = 10
    vague_bonus: int = 5
    verbose_bonus: int = 0

    def __post_init__(self):
        if self.non_expert_k < 1 or self.expert_k < 1:
            raise ValidationError("base k values must be >= 1")
        if self.vague_bonus < 0 or self.verbose_bonus < 0:
            raise ValidationError("k bonuses must be >= 0")


def choose_k(expertise: str, specificity: str, policy: Optional[KPolicy] = None) -> int:
    """Pure lookup: base k by expertise, plus the specificity bonus."""
    policy = policy if policy is not None else KPolicy()
    if expertise not in (EXPERT, NON_EXPERT):
        raise ValidationError(f"unknown expertise label {expertise!r}")
    if specificity not in (VAGUE, VERBOSE):
        raise ValidationError(f"unknown specificity label {specificity!r}")
    base = policy.expert_k if expertise == EXPERT else policy.non_expert_k
    bonus = policy.vague_bonus if specificity == VAGUE else policy.verbose_bonus
    return base + bonus


@dataclass(frozen=True)
class QueryAnalysis:
    """Everything downstream retrieval/generation needs to know per query."""

    original: str
    question: str
    doc_reference: Optional[str]
    matched_doc: Optional[str]
    match_similarity: float
    expertise: str
    readability: float
    specificity: str
    chosen_k: int
    match_score: Optional[int] = None

    def __post_init__(self):
        if self.expertise not in (EXPERT, NON_EXPERT):
            raise ValidationError(f"unknown expertise label {self.expertise!r}")
        if self.specificity not in (VAGUE, VERBOSE):
            raise ValidationError(f"unknown specificity label {self.specificity!r}")
        if (self.expertise == EXPERT) != (
            self.readability >= EXPERT_READABILITY_CUTOFF
        ):
            raise ValidationError(
                f"expertise {self.expertise!r} inconsistent with readability "
                f"{self.readability}"
            )
        if self.chosen_k < 1:
            raise ValidationError("chosen_k must be >= 1")
        if not (-1.0 <= self.match_similarity <= 1.0 + 1e-9):
            raise ValidationError(
                f"match similarity {self.match_similarity} outside [-1, 1]"
            )
        if self.match_score not in (None, -1, 0, 1):
            raise ValidationError(f"match score {self.match_score!r} not in {{-1,0,+1}}")


def analyze_query(
    query: str,
    corpus: Corpus,
    backend: EmbeddingBackend,
    *,
    domain: Optional[str] = None,
    thresholds: Optional[ThresholdTable] = None,
    policy: Optional[KPolicy] = None,
    extractor: str = "simple",
    entity_extractor: Optional[EntityExtractor] = None,
    classifier: Optional[SpecificityClassifier] = None,
    gold_doc: Optional[str] = None,
) -> QueryAnalysis:
    """Run the full translation stage for one query.

    Readability (and hence expertise) is computed on the question side
    so that the document title does not inflate the score; specificity
    looks at the whole query. ``gold_doc`` switches on evaluation mode,
    recording the -1/0/+1 match score.
    """
    if not query.strip():
        raise ValidationError("query is empty")
    if extractor not in ("simple", "ner"):
        raise ValidationError(f"unknown extractor mode {extractor!r}")
    thresholds = thresholds if thresholds is not None else default_thresholds()
    policy = policy if policy is not None else KPolicy()
    classifier = classifier if classifier is not None else HeuristicSpecificityClassifier()

    if extractor == "simple":
        extracted = simple_extract(query)
        reference, question = extracted.doc_reference, extracted.question
    else:
        ner = entity_extractor if entity_extractor is not None else HeuristicEntityExtractor()
        reference, question = ner.extract(query), query.strip()

    if reference:
        match = match_file(reference, corpus, backend, thresholds.for_domain(domain))
    else:
        match = FileMatch(matched_doc=None, similarity=0.0)

    readability_text = question if _words(question) else query
    readability = dale_chall(readability_text)
    expertise = classify_expertise(readability)
    specificity = classifier.classify(
        query, has_matched_reference=match.matched_doc is not None
    )
    return QueryAnalysis(
        original=query,
        question=question if question else query.strip(),
        doc_reference=reference,
        matched_doc=match.matched_doc,
        match_similarity=match.similarity,
        expertise=expertise,
        readability=readability,
        specificity=specificity,
        chosen_k=choose_k(expertise, specificity, policy),
        match_score=(
            score_match(match.matched_doc, gold_doc) if gold_doc is not None else None
        ),
    )
