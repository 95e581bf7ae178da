"""Scoring generated answers: relevancy, faithfulness, ROUGE, BERTScore.

Answer relevancy asks a judge model to regenerate the questions an
answer responds to, then averages the cosine similarity of each against
the original question; non-committal answers are multiplied by zero,
and the multiplier-free mean is kept for ablation. Faithfulness
decomposes the answer into atomic claims and has the judge verdict each
against the retrieved contexts only. ROUGE-recall and BERTScore-F1 are
computed locally and never require a judge.

Judge prompts ship as versioned template files next to the generation
prompts; :class:`MockJudge` implements their exact response formats so
the whole evaluation stage runs offline and deterministically.
"""

from __future__ import annotations

import dataclasses
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .embedding import EmbeddingBackend, TokenEmbeddingBackend, embed_batch, tokenize_words
from .errors import TransportError, ValidationError
from .generation import GenerationRecord, format_contexts, load_template, _fill
from .llm import LLMClient, Message

logger = logging.getLogger(__name__)

_Q_LINE_RE = re.compile(r"^Q:\s*(.+)$", re.MULTILINE)
_NONCOMMITTAL_RE = re.compile(r"^NONCOMMITTAL:\s*(yes|no)\s*$", re.IGNORECASE | re.MULTILINE)
_CLAIM_LINE_RE = re.compile(r"^CLAIM:\s*(.+)$", re.MULTILINE)
_VERDICT_LINE_RE = re.compile(
    r"^VERDICT\s*(\d+)\s*:\s*(supported|unsupported)\s*$", re.IGNORECASE | re.MULTILINE
)


@dataclass(frozen=True)
class RelevancyResult:
    """Question-regeneration relevancy for one answer."""

    generated_questions: tuple[str, ...]
    cosine_scores: tuple[float, ...]
    mean_cosine: float
    non_committal: bool
    final_score: float
    n_requested: int
    count_mismatch: bool = False
    flags: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.generated_questions) != len(self.cosine_scores):
            raise ValidationError("question/cosine length mismatch")
        expected = 0.0 if self.non_committal else self.mean_cosine
        if abs(self.final_score - expected) > 1e-12:
            raise ValidationError("final_score inconsistent with multiplier rule")


@dataclass(frozen=True)
class FaithfulnessResult:
    """Claim-level support of one answer by its retrieved contexts."""

    claims: tuple[str, ...]
    supported: tuple[bool, ...]
    score: float
    transcripts: tuple[str, ...] = field(default_factory=tuple)
    flags: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.claims or len(self.claims) != len(self.supported):
            raise ValidationError("claims/supported shape is wrong")
        if not (0.0 <= self.score <= 1.0):
            raise ValidationError(f"faithfulness score {self.score} outside [0,1]")


@dataclass(frozen=True)
class LexicalScores:
    """ROUGE-recall and BERTScore fields; absent metrics stay None."""

    rouge1_recall: Optional[float] = None
    rouge2_recall: Optional[float] = None
    rougeL_recall: Optional[float] = None
    rouge_recall_avg: Optional[float] = None
    bertscore_p: Optional[float] = None
    bertscore_r: Optional[float] = None
    bertscore_f1: Optional[float] = None
    flags: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for name in (
            "rouge1_recall", "rouge2_recall", "rougeL_recall", "rouge_recall_avg",
            "bertscore_p", "bertscore_r", "bertscore_f1",
        ):
            value = getattr(self, name)
            if value is not None and not (-1e-9 <= value <= 1.0 + 1e-9):
                raise ValidationError(f"{name} = {value} outside [0,1]")

    def merged_with(self, other: "LexicalScores") -> "LexicalScores":
        def pick(name: str):
            mine = getattr(self, name)
            return mine if mine is not None else getattr(other, name)

        return LexicalScores(
            rouge1_recall=pick("rouge1_recall"),
            rouge2_recall=pick("rouge2_recall"),
            rougeL_recall=pick("rougeL_recall"),
            rouge_recall_avg=pick("rouge_recall_avg"),
            bertscore_p=pick("bertscore_p"),
            bertscore_r=pick("bertscore_r"),
            bertscore_f1=pick("bertscore_f1"),
            flags=tuple(dict.fromkeys(self.flags + other.flags)),
        )


def _judge_messages(template_name: str, values: dict[str, str]) -> list[Message]:
    template = load_template(template_name)
    return [
        {"role": "system", "content": _fill(template.system, values, template.name)},
        {"role": "user", "content": _fill(template.user, values, template.name)},
    ]


def _cosine_rows(matrix: np.ndarray, vec: np.ndarray) -> list[float]:
    vnorm = float(np.linalg.norm(vec))
    out = []
    for row in matrix:
        denom = vnorm * float(np.linalg.norm(row))
        out.append(float(row @ vec / denom) if denom > 0 else 0.0)
    return out


def answer_relevancy(
    record: GenerationRecord,
    judge: LLMClient,
    backend: EmbeddingBackend,
    n_questions: int = 3,
) -> RelevancyResult:
    """Mean cosine between the original question and regenerated ones.

    The judge both writes the questions and flags non-committal answers
    in a single call; a wrong question count triggers one retry, after
    which whatever was produced is scored with ``count_mismatch`` set.
    The multiplier-free mean is retained alongside the final score.
    """
    if n_questions < 1:
        raise ValidationError("n_questions must be >= 1")
    answer = record.response.strip()
    if not answer:
        raise ValidationError("cannot score an empty answer")

    messages = _judge_messages(
        "judge_questions", {"answer": answer, "n": str(n_questions)}
    )
    flags: list[str] = []
    best_qs: list[str] = []
    non_committal = False
    nc_seen = False
    for attempt in range(2):
        response = judge.complete(messages)
        questions = [q.strip() for q in _Q_LINE_RE.findall(response)]
        nc_match = _NONCOMMITTAL_RE.search(response)
        if nc_match:
            non_committal = nc_match.group(1).lower() == "yes"
            nc_seen = True
        if len(questions) == n_questions:
            best_qs = questions
            break
        if len(questions) > len(best_qs):
            best_qs = questions
        if attempt == 0:
            logger.warning(
                "judge returned %d questions (wanted %d) for %s; retrying",
                len(questions), n_questions, record.record_id,
            )
    if len(best_qs) != n_questions:
        flags.append("question_count_mismatch")
    if not nc_seen:
        flags.append("noncommittal_unparsed")

    if best_qs:
        matrix = embed_batch(backend, [record.question] + best_qs)
        cosines = _cosine_rows(matrix[1:], matrix[0])
        mean_cosine = float(sum(cosines) / len(cosines))
    else:
        cosines = []
        mean_cosine = 0.0
        flags.append("no_questions_generated")

    return RelevancyResult(
        generated_questions=tuple(best_qs),
        cosine_scores=tuple(cosines),
        mean_cosine=mean_cosine,
        non_committal=non_committal,
        final_score=0.0 if non_committal else mean_cosine,
        n_requested=n_questions,
        count_mismatch=len(best_qs) != n_questions,
        flags=tuple(flags),
    )


def faithfulness(record: GenerationRecord, judge: LLMClient) -> FaithfulnessResult:
    """Fraction of the answer's atomic claims supported by its contexts.

    Stage 1 decomposes the answer into claims (falling back to the whole
    answer as a single claim if the judge yields none twice); stage 2
    verdicts every claim against only the record's contexts. Verdicts
    that stay unparseable after one retry count as unsupported.
    """
    answer = record.response.strip()
    if not answer:
        raise ValidationError("cannot score an empty answer")
    if not record.context_texts:
        raise ValidationError("faithfulness needs retrieved contexts")

    flags: list[str] = []
    transcripts: list[str] = []

    claim_messages = _judge_messages("judge_claims", {"answer": answer})
    claims: list[str] = []
    for attempt in range(2):
        response = judge.complete(claim_messages)
        transcripts.append(response)
        claims = [c.strip() for c in _CLAIM_LINE_RE.findall(response) if c.strip()]
        if claims:
            break
        if attempt == 0:
            logger.warning("judge produced no claims for %s; retrying", record.record_id)
    if not claims:
        claims = [answer]
        flags.append("claims_fallback_whole_answer")

    contexts_text = format_contexts(record.context_ids, record.context_texts)
    claims_text = "\n".join(f"{i}. {c}" for i, c in enumerate(claims, start=1))
    verdict_messages = _judge_messages(
        "judge_verdicts", {"contexts": contexts_text, "claims": claims_text}
    )
    verdicts: dict[int, bool] = {}
    for attempt in range(2):
        response = judge.complete(verdict_messages)
        transcripts.append(response)
        for num, label in _VERDICT_LINE_RE.findall(response):
            idx = int(num)
            if 1 <= idx <= len(claims) and idx not in verdicts:
                verdicts[idx] = label.lower() == "supported"
        if len(verdicts) == len(claims):
            break
        if attempt == 0:
            logger.warning(
                "judge verdicts incomplete (%d/%d) for %s; retrying",
                len(verdicts), len(claims), record.record_id,
            )
    if len(verdicts) != len(claims):
        flags.append("verdicts_unparsed_as_unsupported")

    supported = tuple(verdicts.get(i, False) for i in range(1, len(claims) + 1))
    return FaithfulnessResult(
        claims=tuple(claims),
        supported=supported,
        score=sum(supported) / len(supported),
        transcripts=tuple(transcripts),
        flags=tuple(flags),
    )


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(prev[j - 1] + 1)
            else:
                current.append(max(prev[j], current[-1]))
        prev = current
    return prev[-1]


def rouge_recall(answer: str, reference: str) -> LexicalScores:
    """Reference-side ROUGE-1/2 recall (clipped) and ROUGE-L recall.

    Tokenization is lowercase, punctuation stripped, whitespace split.
    A reference too short for an n-gram order scores 0 there with a
    flag; the average is always the mean of the three components.
    """
    ans = tokenize_words(answer)
    ref = tokenize_words(reference)
    if not ans or not ref:
        raise ValidationError("both texts must tokenize to at least one token")

    flags: list[str] = []

    def clipped_recall(n: int) -> float:
        ref_counts = _ngram_counts(ref, n)
        if not ref_counts:
            flags.append(f"rouge{n}_reference_too_short")
            return 0.0
        ans_counts = _ngram_counts(ans, n)
        matched = sum(min(count, ans_counts[gram]) for gram, count in ref_counts.items())
        return matched / sum(ref_counts.values())

    r1 = clipped_recall(1)
    r2 = clipped_recall(2)
    rl = _lcs_length(ans, ref) / len(ref)
    return LexicalScores(
        rouge1_recall=r1,
        rouge2_recall=r2,
        rougeL_recall=rl,
        rouge_recall_avg=(r1 + r2 + rl) / 3.0,
        flags=tuple(flags),
    )


def bertscore_f1(
    answer: str, reference: str, token_backend: TokenEmbeddingBackend
) -> LexicalScores:
    """Greedy token-matching similarity between two texts.

    Precision averages, over answer tokens, the best cosine against any
    reference token; recall is symmetric; F1 combines them (0 when both
    vanish). Per-pair similarities are floored at 0 so scores stay in
    [0, 1] under any embedding backend.
    """
    tokens_a, vecs_a = token_backend.embed_tokens(answer)
    tokens_r, vecs_r = token_backend.embed_tokens(reference)
    if not tokens_a or not tokens_r:
        raise ValidationError("both texts must tokenize to at least one token")

    norms_a = np.linalg.norm(vecs_a, axis=1)
    norms_r = np.linalg.norm(vecs_r, axis=1)
    sims = vecs_a @ vecs_r.T
    denom = np.outer(norms_a, norms_r)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(denom > 0, sims / denom, 0.0)
    sims = np.maximum(sims, 0.0)

    precision = float(sims.max(axis=1).mean())
    recall = float(sims.max(axis=0).mean())
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return LexicalScores(bertscore_p=precision, bertscore_r=recall, bertscore_f1=f1)


@dataclass(frozen=True)
class ScoredRecord:
    """All metric results for one generation record."""

    record_id: str
    qa_id: str
    template: str
    model: str
    k: int
    k_mode: str
    skipped: bool = False
    relevancy: dict[str, RelevancyResult] = field(default_factory=dict)
    faithfulness: Optional[FaithfulnessResult] = None
    lexical: Optional[LexicalScores] = None
    flags: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "qa_id": self.qa_id,
            "template": self.template,
            "model": self.model,
            "k": self.k,
            "k_mode": self.k_mode,
            "skipped": self.skipped,
            "relevancy": {
                n: dataclasses.asdict(r) for n, r in sorted(self.relevancy.items())
            },
            "faithfulness": (
                dataclasses.asdict(self.faithfulness) if self.faithfulness else None
            ),
            "lexical": dataclasses.asdict(self.lexical) if self.lexical else None,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ScoredRecord":
        def tup(values):
            return tuple(values) if values is not None else ()

        relevancy = {}
        for n, r in (raw.get("relevancy") or {}).items():
            relevancy[n] = RelevancyResult(
                generated_questions=tup(r["generated_questions"]),
                cosine_scores=tuple(float(c) for c in r["cosine_scores"]),
                mean_cosine=float(r["mean_cosine"]),
                non_committal=bool(r["non_committal"]),
                final_score=float(r["final_score"]),
                n_requested=int(r["n_requested"]),
                count_mismatch=bool(r.get("count_mismatch", False)),
                flags=tup(r.get("flags")),
            )
        faith = raw.get("faithfulness")
        lexical = raw.get("lexical")
        return cls(
            record_id=raw["record_id"],
            qa_id=raw["qa_id"],
            template=raw["template"],
            model=raw["model"],
            k=int(raw["k"]),
            k_mode=raw["k_mode"],
            skipped=bool(raw.get("skipped", False)),
            relevancy=relevancy,
            faithfulness=(
                FaithfulnessResult(
                    claims=tup(faith["claims"]),
                    supported=tuple(bool(s) for s in faith["supported"]),
                    score=float(faith["score"]),
                    transcripts=tup(faith.get("transcripts")),
                    flags=tup(faith.get("flags")),
                )
                if faith
                else None
            ),
            lexical=(
                LexicalScores(
                    rouge1_recall=lexical.get("rouge1_recall"),
                    rouge2_recall=lexical.get("rouge2_recall"),
                    rougeL_recall=lexical.get("rougeL_recall"),
                    rouge_recall_avg=lexical.get("rouge_recall_avg"),
                    bertscore_p=lexical.get("bertscore_p"),
                    bertscore_r=lexical.get("bertscore_r"),
                    bertscore_f1=lexical.get("bertscore_f1"),
                    flags=tup(lexical.get("flags")),
                )
                if lexical
                else None
            ),
            flags=tup(raw.get("flags")),
        )


def score_record(
    record: GenerationRecord,
    judge: Optional[LLMClient],
    backend: EmbeddingBackend,
    token_backend: Optional[TokenEmbeddingBackend],
    *,
    reference: Optional[str] = None,
    n_questions_list: Sequence[int] = (3, 5),
) -> ScoredRecord:
    """Run every metric that can run, flagging the rest.

    The reference for lexical metrics defaults to the concatenated
    retrieved contexts. Failed or empty-response records are marked
    skipped; a dead judge skips only the judge metrics; a missing token
    backend skips only BERTScore.
    """
    base = dict(
        record_id=record.record_id,
        qa_id=record.qa_id,
        template=record.template,
        model=record.model,
        k=record.k,
        k_mode=record.k_mode,
    )
    if record.failed or not record.response.strip():
        return ScoredRecord(skipped=True, flags=("empty_or_failed_response",), **base)

    flags: list[str] = []
    relevancy: dict[str, RelevancyResult] = {}
    faith: Optional[FaithfulnessResult] = None
    if judge is not None:
        try:
            for n in n_questions_list:
                relevancy[str(n)] = answer_relevancy(record, judge, backend, n_questions=n)
            if record.context_texts:
                faith = faithfulness(record, judge)
            else:
                flags.append("faithfulness_skipped_no_contexts")
        except TransportError as exc:
            logger.warning("judge unavailable for %s: %s", record.record_id, exc)
            relevancy = {}
            faith = None
            flags.append("judge_unavailable")
    else:
        flags.append("judge_not_configured")

    reference_text = (
        reference if reference is not None else "\n\n".join(record.context_texts)
    )
    lexical: Optional[LexicalScores] = None
    if tokenize_words(reference_text):
        lexical = rouge_recall(record.response, reference_text)
        if token_backend is not None:
            try:
                lexical = lexical.merged_with(
                    bertscore_f1(record.response, reference_text, token_backend)
                )
            except TransportError as exc:
                logger.warning("token backend unavailable for %s: %s", record.record_id, exc)
                flags.append("bertscore_skipped")
        else:
            flags.append("bertscore_skipped")
    else:
        flags.append("lexical_skipped_empty_reference")

    return ScoredRecord(
        skipped=False,
        relevancy=relevancy,
        faithfulness=faith,
        lexical=lexical,
        flags=tuple(flags),
        **base,
    )


_METRIC_COLUMNS = (
    "n_records",
    "n_scored",
    "faithfulness",
    "relevancy_n3",
    "relevancy_n5",
    "relevancy_nomult",
    "rouge_recall",
    "bertscore_f1",
    "non_committal_rate",
)


@dataclass(frozen=True)
class MetricTable:
    """Per-group metric means, rendered as a plot-ready CSV."""

    group_by: tuple[str, ...]
    rows: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {"group_by": list(self.group_by), "rows": [dict(r) for r in self.rows]}

    def render_table(self) -> str:
        header = ",".join(self.group_by + _METRIC_COLUMNS)
        lines = [header]
        for row in self.rows:
            cells = [str(row[g]) for g in self.group_by]
            for col in _METRIC_COLUMNS:
                value = row[col]
                if value is None:
                    cells.append("NA")
                elif isinstance(value, float):
                    cells.append(f"{value:.6f}")
                else:
                    cells.append(str(value))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _mean(values: list[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None


def aggregate_metrics(
    scored: Sequence[ScoredRecord], group_by: Sequence[str] = ("template", "model", "k")
) -> MetricTable:
    """Group means with counts and non-committal rates.

    Groups whose every record was skipped are omitted with a warning.
    Each metric averages over the records where it was computed.
    """
    allowed = {"template", "model", "k", "k_mode", "qa_id"}
    group_by = tuple(group_by)
    if not group_by or any(g not in allowed for g in group_by):
        raise ValidationError(f"group_by must be drawn from {sorted(allowed)}")
    if not scored:
        raise ValidationError("nothing to aggregate")

    groups: dict[tuple, list[ScoredRecord]] = {}
    for s in scored:
        key = tuple(getattr(s, g) for g in group_by)
        groups.setdefault(key, []).append(s)

    rows = []
    for key in sorted(groups, key=lambda k: tuple(str(v) for v in k)):
        members = groups[key]
        usable = [s for s in members if not s.skipped]
        if not usable:
            logger.warning("group %s has no scorable records; omitted", key)
            continue
        rel3 = [s.relevancy["3"] for s in usable if "3" in s.relevancy]
        rel5 = [s.relevancy["5"] for s in usable if "5" in s.relevancy]
        row: dict = dict(zip(group_by, key))
        row["n_records"] = len(members)
        row["n_scored"] = len(usable)
        row["faithfulness"] = _mean(
            [s.faithfulness.score for s in usable if s.faithfulness is not None]
        )
        row["relevancy_n3"] = _mean([r.final_score for r in rel3])
        row["relevancy_n5"] = _mean([r.final_score for r in rel5])
        row["relevancy_nomult"] = _mean([r.mean_cosine for r in rel3])
        row["rouge_recall"] = _mean(
            [
                s.lexical.rouge_recall_avg
                for s in usable
                if s.lexical is not None and s.lexical.rouge_recall_avg is not None
            ]
        )
        row["bertscore_f1"] = _mean(
            [
                s.lexical.bertscore_f1
                for s in usable
                if s.lexical is not None and s.lexical.bertscore_f1 is not None
            ]
        )
        row["non_committal_rate"] = (
            sum(1 for r in rel3 if r.non_committal) / len(rel3) if rel3 else None
        )
        rows.append(row)
    return MetricTable(group_by=group_by, rows=tuple(rows))


_ANSWER_BLOCK_RE = re.compile(r"Answer:\n---\n(.*?)\n---", re.DOTALL)
_N_QUESTIONS_RE = re.compile(r"Generate exactly (\d+) standalone questions")
_CLAIMS_BLOCK_RE = re.compile(r"Claims:\n(.*)\n\nRespond with", re.DOTALL)
_CLAIM_ITEM_RE = re.compile(r"^(\d+)\.\s*(.+)$", re.MULTILINE)
_CONTEXT_TEXT_RE = re.compile(r"\[Context \d+[^\]]*\]\n(.*?)\n\[/Context \d+\]", re.DOTALL)

_NONCOMMITTAL_MARKERS = (
    "i don't know",
    "i do not know",
    "cannot answer",
    "cannot determine",
    "not specified",
    "no supporting passages",
    "unable to",
)


class MockJudge(LLMClient):
    """Deterministic judge implementing the bundled judge-prompt formats.

    Question generation slices the answer's leading words into variants;
    non-committal detection is marker-based; claims are the answer's
    sentences; a claim is supported when at least ``support_threshold``
    of its content words appear in the contexts.
    """

    def __init__(self, support_threshold: float = 0.6):
        if not (0.0 < support_threshold <= 1.0):
            raise ValidationError("support threshold must be in (0, 1]")
        self.support_threshold = support_threshold
        self.model_name = "mock-judge"
        self.temperature = 0.0

    def complete(self, messages: Sequence[Message]) -> str:
        user = next(
            (m["content"] for m in messages if m.get("role") == "user"), ""
        )
        if "NONCOMMITTAL" in user:
            return self._questions(user)
        if "CLAIM:" in user or "'CLAIM:" in user:
            return self._claims(user)
        if "VERDICT" in user:
            return self._verdicts(user)
        raise ValidationError("mock judge got a prompt it does not recognize")

    @staticmethod
    def _answer_from(user: str) -> str:
        match = _ANSWER_BLOCK_RE.search(user)
        return match.group(1).strip() if match else ""

    def _questions(self, user: str) -> str:
        n_match = _N_QUESTIONS_RE.search(user)
        n = int(n_match.group(1)) if n_match else 3
        answer = self._answer_from(user)
        words = tokenize_words(answer) or ["nothing"]
        lines = []
        for i in range(1, n + 1):
            head = " ".join(words[: min(len(words), 4 + 2 * i)])
            lines.append(f"Q: What does the document state about {head}?")
        lowered = answer.lower()
        nc = any(marker in lowered for marker in _NONCOMMITTAL_MARKERS)
        lines.append(f"NONCOMMITTAL: {'yes' if nc else 'no'}")
        return "\n".join(lines)

    def _claims(self, user: str) -> str:
        answer = self._answer_from(user)
        sentences = [
            s.strip() for s in re.split(r"(?<=[.!?])\s+", answer) if s.strip()
        ]
        if not sentences:
            sentences = [answer or "empty answer"]
        return "\n".join(f"CLAIM: {s}" for s in sentences)

    def _verdicts(self, user: str) -> str:
        contexts = " ".join(_CONTEXT_TEXT_RE.findall(user))
        context_tokens = set(tokenize_words(contexts))
        claims_match = _CLAIMS_BLOCK_RE.search(user)
        claims = _CLAIM_ITEM_RE.findall(claims_match.group(1)) if claims_match else []
        lines = []
        for num, claim in claims:
            tokens = tokenize_words(claim)
            if not tokens:
                lines.append(f"VERDICT {num}: unsupported")
                continue
            hit = sum(1 for t in tokens if t in context_tokens) / len(tokens)
            verdict = "supported" if hit >= self.support_threshold else "unsupported"
            lines.append(f"VERDICT {num}: {verdict}")
        return "\n".join(lines)
