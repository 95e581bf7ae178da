"""Declarative pipeline configuration with a stable digest.

One JSON file describes a whole experiment matrix — corpus and benchmark
locations, the chunking/backend/similarity variants to index and
retrieve with, translation and adaptive-k settings, generation and
judging endpoints, and the output directory. Secrets never live here;
API tokens come from environment variables named in the backend/LLM
sub-configs. Flags may override ``out_dir`` and ``seed``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .chunking import ChunkingConfig
from .errors import ValidationError
from .translate import KPolicy, ThresholdTable

DEFAULT_EVAL_KS = tuple(range(1, 51))
DEFAULT_GEN_KS = (1, 3, 5, 10)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs, as plain JSON-serializable values."""

    corpus_root: str
    benchmark_dir: str
    out_dir: str = "runs"
    seed: int = 0
    chunkings: tuple[dict, ...] = (
        {"strategy": "naive", "max_chars": 500},
        {"strategy": "rcts", "max_chars": 500},
    )
    backends: tuple[dict, ...] = ({"kind": "hashed_ngram", "dim": 256},)
    similarities: tuple[str, ...] = ("cosine", "bm25")
    rerank: dict = field(
        default_factory=lambda: {
            "enabled": True,
            "backend": {"kind": "hashed_ngram", "dim": 128},
        }
    )
    translation: dict = field(
        default_factory=lambda: {
            "enabled": True,
            "extractor": "simple",
            "scope_on_match": True,
        }
    )
    candidate_depth: int = 50
    thresholds: dict = field(
        default_factory=lambda: {
            "contractnli": 0.3,
            "cuad": 0.55,
            "maud": 0.38,
            "privacyqa": 0.3,
            "default": 0.3,
        }
    )
    kpolicy: dict = field(
        default_factory=lambda: {
            "non_expert_k": 5,
            "expert_k": 10,
            "vague_bonus": 5,
            "verbose_bonus": 0,
        }
    )
    eval_ks: tuple[int, ...] = DEFAULT_EVAL_KS
    templates: tuple[str, ...] = ("baseline", "custom_legal")
    llm: dict = field(default_factory=lambda: {"kind": "mock", "mode": "extractive"})
    judge: dict = field(default_factory=lambda: {"kind": "mock"})
    token_backend: Optional[dict] = field(
        default_factory=lambda: {"kind": "hashed_token", "dim": 64}
    )
    gen_ks: tuple[int, ...] = DEFAULT_GEN_KS
    adaptive: bool = True
    n_questions: tuple[int, ...] = (3, 5)
    reference_mode: str = "contexts"
    max_context_chars: int = 24_000
    mini_per_domain: int = 6

    def __post_init__(self):
        if not self.chunkings or not self.backends:
            raise ValidationError("need at least one chunking and one backend")
        for sim in self.similarities:
            if sim not in ("cosine", "bm25"):
                raise ValidationError(f"unknown similarity {sim!r}")
        if not self.similarities:
            raise ValidationError("need at least one similarity")
        if self.candidate_depth < 1:
            raise ValidationError("candidate_depth must be >= 1")
        if not self.eval_ks or min(self.eval_ks) < 1:
            raise ValidationError("eval_ks must be counts >= 1")
        if self.reference_mode not in ("contexts", "gold"):
            raise ValidationError(f"unknown reference_mode {self.reference_mode!r}")
        if not self.templates:
            raise ValidationError("need at least one template")
        if any(n < 1 for n in self.n_questions):
            raise ValidationError("n_questions entries must be >= 1")
        if self.mini_per_domain < 1:
            raise ValidationError("mini_per_domain must be >= 1")
        # fail fast on malformed sub-configs
        for raw in self.chunkings:
            ChunkingConfig.from_dict(raw)
        self.threshold_table()
        self.k_policy()

    def to_dict(self) -> dict:
        raw = dataclasses.asdict(self)
        for key in ("chunkings", "backends", "similarities", "eval_ks",
                    "templates", "gen_ks", "n_questions"):
            raw[key] = list(raw[key])
        return raw

    @property
    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]

    def chunking_configs(self) -> list[ChunkingConfig]:
        return [ChunkingConfig.from_dict(raw) for raw in self.chunkings]

    def threshold_table(self) -> ThresholdTable:
        table = {k: v for k, v in self.thresholds.items() if k != "default"}
        return ThresholdTable(
            thresholds=table, default=float(self.thresholds.get("default", 0.3))
        )

    def k_policy(self) -> KPolicy:
        return KPolicy(
            non_expert_k=int(self.kpolicy.get("non_expert_k", 5)),
            expert_k=int(self.kpolicy.get("expert_k", 10)),
            vague_bonus=int(self.kpolicy.get("vague_bonus", 5)),
            verbose_bonus=int(self.kpolicy.get("verbose_bonus", 0)),
        )

    def validate_paths(self) -> None:
        """Check referenced locations exist before any real work starts."""
        corpus = Path(self.corpus_root)
        if not corpus.is_dir():
            raise ValidationError(f"corpus root {corpus} is not a directory")
        bench = Path(self.benchmark_dir)
        if not (bench.is_dir() or bench.is_file()):
            raise ValidationError(f"benchmark path {bench} does not exist")

    def benchmark_paths(self) -> list[Path]:
        bench = Path(self.benchmark_dir)
        if bench.is_file():
            return [bench]
        paths = sorted(bench.glob("*.json"))
        if not paths:
            raise ValidationError(f"no benchmark .json files under {bench}")
        return paths


_TUPLE_FIELDS = {
    "chunkings", "backends", "similarities", "eval_ks",
    "templates", "gen_ks", "n_questions",
}


def config_from_dict(raw: dict, **overrides) -> PipelineConfig:
    """Build a config from a parsed JSON mapping, applying overrides."""
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    merged = dict(raw)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    for name in _TUPLE_FIELDS & set(merged):
        merged[name] = tuple(merged[name])
    try:
        return PipelineConfig(**merged)
    except TypeError as exc:
        raise ValidationError(f"bad config: {exc}") from exc


def load_config(path: str | Path, **overrides) -> PipelineConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ValidationError(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValidationError(f"config file {path} must hold a JSON object")
    return config_from_dict(raw, **overrides)


def save_config(config: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
