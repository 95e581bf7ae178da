"""Prompt rendering, answer generation, and reproducible records.

Templates ship as editable JSON files (baseline, cot, custom_legal plus
the judge prompts) and are addressed by a content hash, so every scored
result can be traced to the exact prompt wording that produced it.
Generation output is a line-delimited record file; each record carries
the full analysis snapshot, contexts, rendered messages, and response,
making it re-scorable without touching the generation service again.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import re
import tempfile
import time
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, Sequence

from .chunking import Chunk
from .corpus import QAPair
from .errors import TemplateError, TransportError, ValidationError
from .llm import LLMClient
from .translate import EXPERT, NON_EXPERT, QueryAnalysis

logger = logging.getLogger(__name__)

_SLOT_RE = re.compile(r"\{([a-z_]+)\}")
_KNOWN_SLOTS = {"question", "contexts", "audience", "answer", "n", "claims"}

AUDIENCE_DIRECTIVES = {
    NON_EXPERT: (
        "Audience: non-expert. Answer in plain, concise language, "
        "free of excessive legal jargon."
    ),
    EXPERT: (
        "Audience: legal expert. Provide a detailed answer with strong "
        "legal grounding, citing the relevant clause language."
    ),
}

NO_CONTEXT_DISCLAIMER = (
    "No supporting passages were retrieved from the corpus. State clearly "
    "that no supporting documents were found before answering."
)

DEFAULT_MAX_CONTEXT_CHARS = 24_000


@dataclass(frozen=True)
class PromptTemplate:
    """A named, versioned pair of system/user templates."""

    name: str
    version: int
    system: str
    user: str

    def __post_init__(self):
        for slot in self.slots:
            if slot not in _KNOWN_SLOTS:
                raise TemplateError(
                    f"template {self.name!r} uses unknown slot {{{slot}}}"
                )

    @property
    def slots(self) -> frozenset[str]:
        return frozenset(
            _SLOT_RE.findall(self.system) + _SLOT_RE.findall(self.user)
        )

    @property
    def digest(self) -> str:
        canon = json.dumps(
            {
                "name": self.name,
                "version": self.version,
                "system": self.system,
                "user": self.user,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


@lru_cache(maxsize=None)
def load_template(name: str) -> PromptTemplate:
    """Load a bundled template by name (baseline, cot, custom_legal, judge_*)."""
    try:
        raw = json.loads(
            resources.files("lexrag.prompts")
            .joinpath(f"{name}.json")
            .read_text(encoding="utf-8")
        )
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        raise TemplateError(f"cannot load template {name!r}: {exc}") from exc
    try:
        return PromptTemplate(
            name=raw["name"],
            version=int(raw["version"]),
            system=raw["system"],
            user=raw["user"],
        )
    except KeyError as exc:
        raise TemplateError(f"template {name!r} is missing field {exc}") from exc


def _fill(template_text: str, values: dict[str, str], template_name: str) -> str:
    def substitute(match: re.Match) -> str:
        slot = match.group(1)
        if slot not in values:
            raise TemplateError(
                f"unresolved slot {{{slot}}} in template {template_name!r}"
            )
        return values[slot]

    return _SLOT_RE.sub(substitute, template_text)


def format_contexts(
    chunk_ids: Sequence[str], texts: Sequence[str], header: str = "Context"
) -> str:
    """Numbered, delimited context blocks; identifiers enable citation."""
    if len(chunk_ids) != len(texts):
        raise ValidationError(
            f"{len(chunk_ids)} chunk ids for {len(texts)} context texts"
        )
    blocks = []
    for i, (cid, text) in enumerate(zip(chunk_ids, texts), start=1):
        blocks.append(f"[{header} {i}: {cid}]\n{text}\n[/{header} {i}]")
    return "\n\n".join(blocks)


@dataclass(frozen=True)
class RenderedPrompt:
    messages: tuple[dict, ...]

    @property
    def text(self) -> str:
        return "\n\n".join(m["content"] for m in self.messages)


def render_prompt(
    template: PromptTemplate,
    question: str,
    contexts: Sequence[Chunk],
    audience: str,
) -> RenderedPrompt:
    """Deterministically render chat messages for one generation call.

    Contexts appear verbatim, numbered and delimited, in rank order.
    With no contexts the disclaimer variant renders instead. Audience
    selects the plain-language or detailed-legal directive.
    """
    if audience not in AUDIENCE_DIRECTIVES:
        raise ValidationError(f"unknown audience {audience!r}")
    if not question.strip():
        raise ValidationError("question is empty")
    if contexts:
        contexts_text = format_contexts(
            [c.chunk_id for c in contexts], [c.text for c in contexts]
        )
    else:
        contexts_text = NO_CONTEXT_DISCLAIMER
    values = {
        "question": question,
        "contexts": contexts_text,
        "audience": AUDIENCE_DIRECTIVES[audience],
    }
    return RenderedPrompt(
        messages=(
            {"role": "system", "content": _fill(template.system, values, template.name)},
            {"role": "user", "content": _fill(template.user, values, template.name)},
        )
    )


@dataclass(frozen=True)
class GenerationRecord:
    """Self-contained provenance for one generated answer."""

    record_id: str
    qa_id: str
    template: str
    template_version: int
    template_hash: str
    model: str
    temperature: float
    k: int
    k_mode: str  # "fixed" | "adaptive"
    analysis: dict
    context_ids: tuple[str, ...]
    context_texts: tuple[str, ...]
    messages: tuple[dict, ...]
    response: str
    error: Optional[str] = None
    truncated: bool = False
    duration_s: float = 0.0

    def __post_init__(self):
        if len(self.context_ids) != len(self.context_texts):
            raise ValidationError("context ids and texts length mismatch")
        if self.k_mode not in ("fixed", "adaptive"):
            raise ValidationError(f"unknown k_mode {self.k_mode!r}")

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def question(self) -> str:
        return self.analysis.get("question", self.analysis.get("original", ""))

    def to_dict(self) -> dict:
        raw = dataclasses.asdict(self)
        raw["context_ids"] = list(self.context_ids)
        raw["context_texts"] = list(self.context_texts)
        raw["messages"] = [dict(m) for m in self.messages]
        return raw

    @classmethod
    def from_dict(cls, raw: dict) -> "GenerationRecord":
        return cls(
            record_id=raw["record_id"],
            qa_id=raw["qa_id"],
            template=raw["template"],
            template_version=int(raw["template_version"]),
            template_hash=raw["template_hash"],
            model=raw["model"],
            temperature=float(raw["temperature"]),
            k=int(raw["k"]),
            k_mode=raw["k_mode"],
            analysis=dict(raw["analysis"]),
            context_ids=tuple(raw["context_ids"]),
            context_texts=tuple(raw["context_texts"]),
            messages=tuple(dict(m) for m in raw["messages"]),
            response=raw["response"],
            error=raw.get("error"),
            truncated=bool(raw.get("truncated", False)),
            duration_s=float(raw.get("duration_s", 0.0)),
        )


def analysis_snapshot(analysis: QueryAnalysis) -> dict:
    return dataclasses.asdict(analysis)


def _truncate_contexts(
    contexts: Sequence[Chunk], max_context_chars: int
) -> tuple[list[Chunk], bool]:
    kept: list[Chunk] = []
    total = 0
    for chunk in contexts:
        if kept and total + len(chunk.text) > max_context_chars:
            return kept, True
        kept.append(chunk)
        total += len(chunk.text)
    return kept, False


def generate_answer(
    client: LLMClient,
    analysis: QueryAnalysis,
    contexts: Sequence[Chunk],
    template: PromptTemplate,
    *,
    qa_id: str,
    k: Optional[int] = None,
    k_mode: str = "adaptive",
    max_context_chars: int = DEFAULT_MAX_CONTEXT_CHARS,
) -> GenerationRecord:
    """Render, call the model, and capture a full record.

    Transport failures (after the client's own retries) yield a failed
    record with the error cause instead of raising, so batch runs
    continue. Fewer contexts than k only warns — a scoped index can
    legitimately be smaller.
    """
    k = k if k is not None else analysis.chosen_k
    if len(contexts) < k:
        logger.warning(
            "query %s: only %d contexts available for k=%d", qa_id, len(contexts), k
        )
    contexts = list(contexts[:k])
    kept, truncated = _truncate_contexts(contexts, max_context_chars)
    if truncated:
        logger.warning(
            "query %s: contexts truncated from %d to %d for budget %d chars",
            qa_id, len(contexts), len(kept), max_context_chars,
        )
    prompt = render_prompt(template, analysis.question, kept, analysis.expertise)

    response, error = "", None
    started = time.perf_counter()
    try:
        response = client.complete(prompt.messages)
    except TransportError as exc:
        error = str(exc)
        logger.error("generation failed for %s: %s", qa_id, exc)
    duration = time.perf_counter() - started

    suffix = "_adaptive" if k_mode == "adaptive" else ""
    return GenerationRecord(
        record_id=f"{qa_id}__{template.name}__{client.model_name}__k{k}{suffix}",
        qa_id=qa_id,
        template=template.name,
        template_version=template.version,
        template_hash=template.digest,
        model=client.model_name,
        temperature=client.temperature,
        k=k,
        k_mode=k_mode,
        analysis=analysis_snapshot(analysis),
        context_ids=tuple(c.chunk_id for c in kept),
        context_texts=tuple(c.text for c in kept),
        messages=prompt.messages,
        response=response,
        error=error,
        truncated=truncated,
        duration_s=duration,
    )


def run_matrix(
    qa_pairs: Sequence[QAPair],
    analyses: dict[str, QueryAnalysis],
    contexts_for: Callable[[str, int], Sequence[Chunk]],
    templates: Sequence[PromptTemplate],
    clients: Sequence[LLMClient],
    ks: Sequence[int],
    *,
    adaptive: bool = False,
    max_context_chars: int = DEFAULT_MAX_CONTEXT_CHARS,
) -> list[GenerationRecord]:
    """Cartesian sweep: every query × template × client × k.

    In adaptive mode the fixed k list is replaced by each query's
    chosen_k. Failures are recorded per cell and summarized at the end;
    the sweep never aborts mid-way.
    """
    if not qa_pairs or not templates or not clients:
        raise ValidationError("run_matrix needs queries, templates, and clients")
    if not adaptive and (not ks or any(k < 1 for k in ks)):
        raise ValidationError("fixed-k mode needs ks >= 1")

    missing = [qa.qa_id for qa in qa_pairs if qa.qa_id not in analyses]
    if missing:
        raise ValidationError(f"no analysis for queries: {missing[:10]}")

    records = []
    failures = 0
    for qa in qa_pairs:
        analysis = analyses[qa.qa_id]
        k_values = [analysis.chosen_k] if adaptive else list(ks)
        for template in templates:
            for client in clients:
                for k in k_values:
                    record = generate_answer(
                        client,
                        analysis,
                        contexts_for(qa.qa_id, k),
                        template,
                        qa_id=qa.qa_id,
                        k=k,
                        k_mode="adaptive" if adaptive else "fixed",
                        max_context_chars=max_context_chars,
                    )
                    if record.failed:
                        failures += 1
                    records.append(record)
    if failures:
        logger.warning("run_matrix: %d of %d cells failed", failures, len(records))
    return records


def write_records(records: Sequence[GenerationRecord], path: str | Path) -> None:
    """Line-delimited records, written atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record.to_dict(), sort_keys=True, ensure_ascii=False))
                fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_records(path: str | Path) -> list[GenerationRecord]:
    path = Path(path)
    records = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(GenerationRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValidationError(
                    f"bad generation record at {path}:{line_no}: {exc}"
                ) from exc
    return records
