"""Stage orchestration: run directories, manifests, and the command verbs.

Experiment outputs are append-only: every command that writes artifacts
gets a fresh timestamped directory under the configured output root,
owns it via a lock file, and finishes by writing a manifest listing
every file it produced. Indexes are the one shared artifact — they live
under ``<out_dir>/indexes`` keyed by chunking and backend, and are
rebuilt only when the corpus or their configuration changes.

Report files (PR curves, metric tables) contain no timestamps or
timings, so identical inputs reproduce them byte for byte.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import tempfile
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Optional, Sequence

from .chunking import chunk_document
from .config import PipelineConfig
from .corpus import Corpus, QAPair, load_benchmarks, load_corpus, sample_mini, write_benchmark
from .embedding import EmbeddingBackend, backend_from_config, embed_batch, token_backend_from_config
from .errors import ProvenanceError, TransportError, ValidationError
from .generation import (
    GenerationRecord,
    generate_answer,
    load_template,
    read_records,
    run_matrix,
    write_records,
)
from .generation_metrics import (
    MockJudge,
    aggregate_metrics,
    score_record,
)
from .index import (
    BM25Index,
    EmbeddingReranker,
    VectorIndex,
    build_index,
    cosine_search,
    load_index,
    rerank,
    save_index,
    ScoredChunk,
)
from .chunking import Chunk
from .llm import LLMClient, OpenAIChatClient, ScriptedLLMClient, llm_from_config
from .retrieval_metrics import PRCurve, RetrievalRun, VariantLabels, evaluate_run
from .translate import (
    HeuristicSpecificityClassifier,
    QueryAnalysis,
    RemoteEntityExtractor,
    RemoteSpecificityClassifier,
    analyze_query,
)

logger = logging.getLogger(__name__)


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _canon_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


class RunContext:
    """Owns one timestamped run directory for the duration of a command."""

    def __init__(self, config: PipelineConfig, command: str):
        self.config = config
        self.command = command
        out_root = Path(config.out_dir)
        out_root.mkdir(parents=True, exist_ok=True)
        stamp = time.strftime("%Y%m%d-%H%M%S")
        run_dir = None
        for i in range(1000):
            suffix = f"-{i:03d}" if i else ""
            candidate = out_root / f"{stamp}-{command}{suffix}"
            try:
                candidate.mkdir()
                run_dir = candidate
                break
            except FileExistsError:
                continue
        if run_dir is None:
            raise ValidationError(f"cannot allocate a run directory under {out_root}")
        self.run_dir = run_dir
        self._lock = self.run_dir / "run.lock"
        fd = os.open(self._lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        self.artifacts: list[str] = []
        self.warnings: list[str] = []
        self.timings: dict[str, float] = {}
        self.started_at = time.strftime("%Y-%m-%dT%H:%M:%S")
        self._t0 = time.perf_counter()

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 6)

    def _record(self, path: Path) -> None:
        try:
            rel = path.relative_to(self.run_dir).as_posix()
        except ValueError:
            rel = str(path)
        self.artifacts.append(rel)

    def write_text(self, relpath: str, text: str) -> Path:
        path = self.run_dir / relpath
        _atomic_write_text(path, text)
        self._record(path)
        return path

    def write_json(self, relpath: str, obj) -> Path:
        return self.write_text(relpath, _canon_json(obj))

    def record_external(self, path: Path) -> None:
        self.artifacts.append(str(path))

    def warn(self, message: str) -> None:
        logger.warning("%s", message)
        self.warnings.append(message)

    def finish(self, variants: Sequence[str] = ()) -> Path:
        manifest = {
            "command": self.command,
            "config_digest": self.config.digest,
            "started_at": self.started_at,
            "duration_s": round(time.perf_counter() - self._t0, 6),
            "stage_timings": self.timings,
            "variants": sorted(variants),
            "artifacts": sorted(self.artifacts + ["manifest.json"]),
            "warnings": self.warnings,
        }
        path = self.run_dir / "manifest.json"
        _atomic_write_text(path, _canon_json(manifest))
        self._lock.unlink(missing_ok=True)
        return path


def corpus_digest(corpus: Corpus) -> str:
    h = hashlib.sha256()
    for doc in corpus:
        h.update(doc.doc_id.encode("utf-8"))
        h.update(b"\x00")
        h.update(doc.text.encode("utf-8"))
        h.update(b"\x01")
    return h.hexdigest()[:16]


def index_path(config: PipelineConfig, chunking_label: str, backend_name: str) -> Path:
    return Path(config.out_dir) / "indexes" / f"{chunking_label}__{backend_name}.json"


def _meta_path(ip: Path) -> Path:
    return ip.with_name(ip.stem + ".meta.json")


# --------------------------------------------------------------------------
# index


def cmd_index(config: PipelineConfig) -> dict:
    """Build one vector index per (chunking × backend); skip fresh ones."""
    config.validate_paths()
    corpus = load_corpus(config.corpus_root)
    digest = corpus_digest(corpus)

    ctx = RunContext(config, "index")
    built, up_to_date = [], []
    try:
        for backend_raw in config.backends:
            backend = backend_from_config(backend_raw)
            pending = []
            for chunking in config.chunking_configs():
                ip = index_path(config, chunking.label, backend.name)
                meta = {
                    "corpus_digest": digest,
                    "chunking": chunking.to_dict(),
                    "backend": backend.name,
                    "dim": backend.dim,
                }
                mp = _meta_path(ip)
                if ip.exists() and mp.exists():
                    try:
                        if json.loads(mp.read_text(encoding="utf-8")) == meta:
                            logger.info("index %s is up-to-date", ip.name)
                            up_to_date.append(str(ip))
                            continue
                    except json.JSONDecodeError:
                        pass
                pending.append((chunking, ip, meta))

            if not pending:
                continue
            # probe the backend before any chunking work, so an unreachable
            # endpoint costs nothing
            with ctx.stage(f"probe:{backend.name}"):
                embed_batch(backend, ["connectivity probe"])
            for chunking, ip, meta in pending:
                with ctx.stage(f"build:{chunking.label}__{backend.name}"):
                    chunks = [
                        c for doc in corpus for c in chunk_document(doc, chunking)
                    ]
                    index = build_index(chunks, backend, chunking)
                    save_index(index, ip)
                    _atomic_write_text(_meta_path(ip), _canon_json(meta))
                built.append(str(ip))
                ctx.record_external(ip)
                ctx.record_external(_meta_path(ip))
        summary = {
            "corpus_digest": digest,
            "built": sorted(built),
            "up_to_date": sorted(up_to_date),
        }
        ctx.write_json("index_summary.json", summary)
        ctx.finish()
        summary["run_dir"] = str(ctx.run_dir)
        return summary
    except BaseException:
        ctx.finish()
        raise


# --------------------------------------------------------------------------
# retrieve


def _scored_to_dict(s: ScoredChunk) -> dict:
    return {
        "chunk_id": s.chunk.chunk_id,
        "doc_id": s.chunk.doc_id,
        "span": [s.chunk.start, s.chunk.end],
        "text": s.chunk.text,
        "score": s.score,
        "rank": s.rank,
    }


def _scored_from_dict(raw: dict) -> ScoredChunk:
    chunk = Chunk(
        doc_id=raw["doc_id"], start=raw["span"][0], end=raw["span"][1], text=raw["text"]
    )
    return ScoredChunk(chunk=chunk, score=float(raw["score"]), rank=int(raw["rank"]))


def run_payload(run: RetrievalRun, config_digest: str) -> dict:
    return {
        "variant": run.variant.to_dict(),
        "config_digest": config_digest,
        "results": {
            qa_id: [_scored_to_dict(s) for s in scored]
            for qa_id, scored in run.results.items()
        },
    }


def write_run(run: RetrievalRun, path: Path, config_digest: str) -> None:
    _atomic_write_text(path, _canon_json(run_payload(run, config_digest)))


def read_run(path: Path) -> RetrievalRun:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        variant = VariantLabels.from_dict(payload["variant"])
        results = {
            qa_id: tuple(_scored_from_dict(raw) for raw in scored)
            for qa_id, scored in payload["results"].items()
        }
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ValidationError(f"run file {path} is unreadable: {exc}") from exc
    return RetrievalRun(variant=variant, results=results)


def _gold_doc(qa: QAPair) -> Optional[str]:
    return next(iter(qa.doc_ids)) if len(qa.doc_ids) == 1 else None


def compute_analyses(
    config: PipelineConfig,
    corpus: Corpus,
    benchmark: Sequence[QAPair],
    backend: EmbeddingBackend,
) -> dict[str, QueryAnalysis]:
    """Query translation for every benchmark query, in evaluation mode."""
    tr = config.translation
    entity_extractor = (
        RemoteEntityExtractor(tr["ner_endpoint"]) if tr.get("ner_endpoint") else None
    )
    classifier = (
        RemoteSpecificityClassifier(tr["classifier_endpoint"])
        if tr.get("classifier_endpoint")
        else HeuristicSpecificityClassifier()
    )
    thresholds = config.threshold_table()
    policy = config.k_policy()
    analyses = {}
    for qa in benchmark:
        analyses[qa.qa_id] = analyze_query(
            qa.query,
            corpus,
            backend,
            domain=qa.domain,
            thresholds=thresholds,
            policy=policy,
            extractor=tr.get("extractor", "simple"),
            entity_extractor=entity_extractor,
            classifier=classifier,
            gold_doc=_gold_doc(qa),
        )
    return analyses


def cmd_retrieve(config: PipelineConfig) -> dict:
    """Ranked candidate lists per query for every requested variant.

    With translation enabled, both a translated (file-scoped on match)
    and a plain whole-corpus variant are produced so the ablation is
    always available; a configured reranker adds reranked twins.
    """
    config.validate_paths()
    corpus = load_corpus(config.corpus_root)
    benchmark = load_benchmarks(config.benchmark_paths(), corpus)
    if not benchmark:
        raise ValidationError("benchmark is empty")

    ctx = RunContext(config, "retrieve")
    variants_written: list[str] = []
    try:
        translation_on = bool(config.translation.get("enabled", True))
        scope_on_match = bool(config.translation.get("scope_on_match", True))
        modes = [True, False] if translation_on else [False]

        reranker = None
        if config.rerank.get("enabled"):
            reranker = EmbeddingReranker(
                backend_from_config(config.rerank.get("backend", {}))
            )

        for backend_raw in config.backends:
            backend = backend_from_config(backend_raw)
            analyses: dict[str, QueryAnalysis] = {}
            if translation_on:
                with ctx.stage(f"translate:{backend.name}"):
                    analyses = compute_analyses(config, corpus, benchmark, backend)
                ctx.write_json(
                    f"analyses__{backend.name}.json",
                    {qa_id: dataclasses.asdict(a) for qa_id, a in analyses.items()},
                )

            for chunking in config.chunking_configs():
                ip = index_path(config, chunking.label, backend.name)
                if not ip.exists():
                    raise ValidationError(
                        f"index {ip} missing; run the index command first"
                    )
                index = load_index(ip, expected_backend=backend.name)
                if index.chunking != chunking.to_dict():
                    raise ProvenanceError(
                        f"index {ip} was built with different chunking settings"
                    )
                bm25 = BM25Index(index.chunks) if "bm25" in config.similarities else None

                for translated in modes:
                    results: dict[str, dict[str, tuple]] = {
                        sim: {} for sim in config.similarities
                    }
                    questions: dict[str, str] = {}
                    with ctx.stage(
                        f"search:{chunking.label}__{backend.name}__"
                        f"{'translated' if translated else 'plain'}"
                    ):
                        for qa in benchmark:
                            if translated:
                                analysis = analyses[qa.qa_id]
                                question = analysis.question
                                scope = (
                                    analysis.matched_doc if scope_on_match else None
                                )
                            else:
                                question, scope = qa.query, None
                            questions[qa.qa_id] = question
                            qvec = None
                            if "cosine" in config.similarities:
                                qvec = embed_batch(backend, [question])[0]
                            for sim in config.similarities:
                                if sim == "cosine":
                                    scored = cosine_search(
                                        index, qvec, config.candidate_depth, scope=scope
                                    )
                                else:
                                    scored = bm25.search(
                                        question, config.candidate_depth, scope=scope
                                    )
                                results[sim][qa.qa_id] = tuple(scored)

                    for sim in config.similarities:
                        variant = VariantLabels(
                            chunking=chunking.label,
                            backend=backend.name,
                            similarity=sim,
                            reranked=False,
                            translation=translated,
                        )
                        run = RetrievalRun(variant=variant, results=results[sim])
                        ctx.write_json(
                            f"retrieval/{variant.label}.json",
                            run_payload(run, config.digest),
                        )
                        variants_written.append(variant.label)

                        if reranker is not None:
                            rr_results = {}
                            fell_back_any = False
                            for qa_id, scored in results[sim].items():
                                if not scored:
                                    rr_results[qa_id] = ()
                                    continue
                                reordered, fell_back = rerank(
                                    reranker, questions[qa_id], list(scored)
                                )
                                fell_back_any = fell_back_any or fell_back
                                rr_results[qa_id] = tuple(reordered)
                            if fell_back_any:
                                ctx.warn(
                                    f"reranker fell back to input order for variant "
                                    f"{variant.label}"
                                )
                            rr_variant = VariantLabels(
                                chunking=chunking.label,
                                backend=backend.name,
                                similarity=sim,
                                reranked=True,
                                translation=translated,
                            )
                            rr_run = RetrievalRun(variant=rr_variant, results=rr_results)
                            ctx.write_json(
                                f"retrieval/{rr_variant.label}.json",
                                run_payload(rr_run, config.digest),
                            )
                            variants_written.append(rr_variant.label)

        ctx.write_json(
            "retrieve_summary.json",
            {
                "n_queries": len(benchmark),
                "candidate_depth": config.candidate_depth,
                "variants": sorted(variants_written),
            },
        )
        ctx.finish(variants_written)
        return {"run_dir": str(ctx.run_dir), "variants": sorted(variants_written)}
    except BaseException:
        ctx.finish(variants_written)
        raise


def latest_run_dir(config: PipelineConfig, command: str) -> Path:
    """Most recent run directory of a given command under out_dir."""
    out_root = Path(config.out_dir)
    candidates = sorted(
        p for p in out_root.glob(f"*-{command}*") if p.is_dir()
    )
    if not candidates:
        raise ValidationError(
            f"no previous '{command}' run found under {out_root}; "
            f"pass the run directory explicitly"
        )
    return candidates[-1]


# --------------------------------------------------------------------------
# eval-retrieval


def cmd_eval_retrieval(
    config: PipelineConfig, runs_dir: Optional[Path] = None
) -> dict:
    """PR curves per variant plus a combined plot-ready table."""
    config.validate_paths()
    corpus = load_corpus(config.corpus_root)
    benchmark = load_benchmarks(config.benchmark_paths(), corpus)
    runs_dir = Path(runs_dir) if runs_dir else latest_run_dir(config, "retrieve")
    retrieval_dir = runs_dir / "retrieval" if (runs_dir / "retrieval").is_dir() else runs_dir
    run_files = sorted(retrieval_dir.glob("*.json"))
    if not run_files:
        raise ValidationError(f"no retrieval run files under {retrieval_dir}")

    ctx = RunContext(config, "eval-retrieval")
    try:
        curves: list[PRCurve] = []
        with ctx.stage("evaluate"):
            for path in run_files:
                run = read_run(path)
                curves.append(evaluate_run(run, benchmark, config.eval_ks))

        combined_lines: list[str] = []
        all_curves = {}
        for curve in curves:
            table = curve.render_table()
            ctx.write_text(f"curves/{curve.variant.label}.csv", table)
            body = table.splitlines()[1:]
            combined_lines.extend(body)
            all_curves[curve.variant.label] = curve.to_dict()
        header = "variant,domain,k,precision,recall,n_queries"
        ctx.write_text(
            "pr_curves.csv", "\n".join([header] + sorted(combined_lines)) + "\n"
        )
        ctx.write_json("pr_curves.json", all_curves)
        ctx.finish([c.variant.label for c in curves])
        return {
            "run_dir": str(ctx.run_dir),
            "variants": sorted(all_curves),
            "n_queries": len(benchmark),
        }
    except BaseException:
        ctx.finish()
        raise


# --------------------------------------------------------------------------
# generate


def _source_variant(config: PipelineConfig) -> VariantLabels:
    """The retrieval variant that feeds generation contexts."""
    chunkings = config.chunking_configs()
    chunking = next((c for c in chunkings if c.strategy == "rcts"), chunkings[0])
    backend = backend_from_config(config.backends[0])
    sim = "cosine" if "cosine" in config.similarities else config.similarities[0]
    return VariantLabels(
        chunking=chunking.label,
        backend=backend.name,
        similarity=sim,
        reranked=False,
        translation=bool(config.translation.get("enabled", True)),
    )


def cmd_generate(config: PipelineConfig, runs_dir: Optional[Path] = None) -> dict:
    """Generate answers for the fixed-k sweep and, optionally, adaptive k."""
    config.validate_paths()
    corpus = load_corpus(config.corpus_root)
    benchmark = load_benchmarks(config.benchmark_paths(), corpus)
    runs_dir = Path(runs_dir) if runs_dir else latest_run_dir(config, "retrieve")

    variant = _source_variant(config)
    run_path = runs_dir / "retrieval" / f"{variant.label}.json"
    if not run_path.exists():
        raise ValidationError(
            f"retrieval run {run_path} not found; run the retrieve command first"
        )
    run = read_run(run_path)

    backend = backend_from_config(config.backends[0])
    analyses = compute_analyses(config, corpus, benchmark, backend)
    templates = [load_template(name) for name in config.templates]
    client = llm_from_config(config.llm)

    def contexts_for(qa_id: str, k: int):
        return [s.chunk for s in run.results[qa_id][:k]]

    ctx = RunContext(config, "generate")
    try:
        records: list[GenerationRecord] = []
        with ctx.stage("fixed_k"):
            records.extend(
                run_matrix(
                    benchmark, analyses, contexts_for, templates, [client],
                    config.gen_ks, adaptive=False,
                    max_context_chars=config.max_context_chars,
                )
            )
        if config.adaptive:
            with ctx.stage("adaptive_k"):
                records.extend(
                    run_matrix(
                        benchmark, analyses, contexts_for, templates, [client],
                        (), adaptive=True,
                        max_context_chars=config.max_context_chars,
                    )
                )
        path = ctx.run_dir / "records.jsonl"
        write_records(records, path)
        ctx._record(path)
        failures = sum(1 for r in records if r.failed)
        if failures:
            ctx.warn(f"{failures} of {len(records)} generation cells failed")
        ctx.write_json(
            "generate_summary.json",
            {
                "n_records": len(records),
                "n_failed": failures,
                "source_variant": variant.label,
                "templates": list(config.templates),
                "model": client.model_name,
                "ks": list(config.gen_ks),
                "adaptive": config.adaptive,
            },
        )
        ctx.finish([variant.label])
        return {
            "run_dir": str(ctx.run_dir),
            "records": str(path),
            "n_records": len(records),
            "n_failed": failures,
        }
    except BaseException:
        ctx.finish()
        raise


# --------------------------------------------------------------------------
# eval-generation


def judge_from_config(raw: dict) -> Optional[LLMClient]:
    kind = raw.get("kind", "mock")
    if kind == "none":
        return None
    if kind == "mock":
        return MockJudge(support_threshold=float(raw.get("support_threshold", 0.6)))
    if kind == "http":
        return OpenAIChatClient(
            endpoint=raw["endpoint"],
            model=raw["model"],
            temperature=float(raw.get("temperature", 0.0)),
            api_key_env=raw.get("api_key_env", "LEXRAG_CHAT_TOKEN"),
            timeout=float(raw.get("timeout", 60.0)),
            max_retries=int(raw.get("max_retries", 3)),
        )
    if kind == "scripted":
        return ScriptedLLMClient(raw["responses"])
    raise ValidationError(f"unknown judge kind {kind!r}")


def cmd_eval_generation(
    config: PipelineConfig, records_path: Optional[Path] = None
) -> dict:
    """Score records with all four metrics and aggregate into tables."""
    if records_path is None:
        records_path = latest_run_dir(config, "generate") / "records.jsonl"
    records_path = Path(records_path)
    if not records_path.exists():
        raise ValidationError(f"records file {records_path} does not exist")
    records = read_records(records_path)
    if not records:
        raise ValidationError(f"records file {records_path} is empty")

    judge = judge_from_config(config.judge)
    backend = backend_from_config(config.backends[0])
    token_backend = None
    if config.token_backend and config.token_backend.get("kind") != "none":
        token_backend = token_backend_from_config(config.token_backend)

    gold_references: dict[str, str] = {}
    if config.reference_mode == "gold":
        config.validate_paths()
        corpus = load_corpus(config.corpus_root)
        for qa in load_benchmarks(config.benchmark_paths(), corpus):
            gold_references[qa.qa_id] = "\n\n".join(s.quote for s in qa.snippets)

    ctx = RunContext(config, "eval-generation")
    try:
        scored = []
        with ctx.stage("score"):
            for record in records:
                reference = gold_references.get(record.qa_id)
                scored.append(
                    score_record(
                        record, judge, backend, token_backend,
                        reference=reference,
                        n_questions_list=config.n_questions,
                    )
                )
        ctx.write_text(
            "scored.jsonl",
            "".join(
                json.dumps(s.to_dict(), sort_keys=True, ensure_ascii=False) + "\n"
                for s in scored
            ),
        )

        fixed = [s for s in scored if s.k_mode == "fixed"]
        outputs: dict[str, str] = {}
        if fixed:
            table = aggregate_metrics(fixed, group_by=("template", "model", "k"))
            ctx.write_text("metric_table.csv", table.render_table())
            ctx.write_json("metric_table.json", table.to_dict())
            outputs["metric_table"] = str(ctx.run_dir / "metric_table.csv")
        if any(s.k_mode == "adaptive" for s in scored):
            comparison = aggregate_metrics(
                scored, group_by=("k_mode", "template", "model")
            )
            ctx.write_text("adaptive_comparison.csv", comparison.render_table())
            ctx.write_json("adaptive_comparison.json", comparison.to_dict())
            outputs["adaptive_comparison"] = str(
                ctx.run_dir / "adaptive_comparison.csv"
            )

        n_skipped = sum(1 for s in scored if s.skipped)
        if n_skipped:
            ctx.warn(f"{n_skipped} records skipped (failed or empty responses)")
        if any("judge_unavailable" in s.flags for s in scored):
            ctx.warn("judge unavailable: relevancy/faithfulness flagged skipped")
        ctx.finish()
        return {
            "run_dir": str(ctx.run_dir),
            "n_scored": len(scored),
            "n_skipped": n_skipped,
            **outputs,
        }
    except BaseException:
        ctx.finish()
        raise


# --------------------------------------------------------------------------
# ask


def cmd_ask(config: PipelineConfig, query: str) -> dict:
    """Translate → retrieve (chosen k) → generate, returning provenance."""
    config.validate_paths()
    if not query.strip():
        raise ValidationError("query is empty")
    corpus = load_corpus(config.corpus_root)
    backend = backend_from_config(config.backends[0])
    variant = _source_variant(config)
    ip = index_path(config, variant.chunking, backend.name)
    if not ip.exists():
        raise ValidationError(f"index {ip} missing; run the index command first")
    index = load_index(ip, expected_backend=backend.name)

    tr = config.translation
    analysis = analyze_query(
        query,
        corpus,
        backend,
        thresholds=config.threshold_table(),
        policy=config.k_policy(),
        extractor=tr.get("extractor", "simple"),
    )
    scope = analysis.matched_doc if tr.get("scope_on_match", True) else None

    if variant.similarity == "bm25":
        scored = BM25Index(index.chunks).search(
            analysis.question, analysis.chosen_k, scope=scope
        )
    else:
        qvec = embed_batch(backend, [analysis.question])[0]
        scored = cosine_search(index, qvec, analysis.chosen_k, scope=scope)

    template_name = (
        "custom_legal" if "custom_legal" in config.templates else config.templates[0]
    )
    template = load_template(template_name)
    client = llm_from_config(config.llm)
    record = generate_answer(
        client,
        analysis,
        [s.chunk for s in scored],
        template,
        qa_id="ask",
        k=analysis.chosen_k,
        k_mode="adaptive",
        max_context_chars=config.max_context_chars,
    )
    return {
        "answer": record.response,
        "error": record.error,
        "matched_doc": analysis.matched_doc,
        "match_similarity": analysis.match_similarity,
        "expertise": analysis.expertise,
        "readability": analysis.readability,
        "specificity": analysis.specificity,
        "k": analysis.chosen_k,
        "scoped": scope is not None,
        "contexts": [s.chunk.chunk_id for s in scored],
        "template": template_name,
        "model": client.model_name,
    }


# --------------------------------------------------------------------------
# sample-mini


def cmd_sample_mini(
    config: PipelineConfig,
    per_domain: Optional[int] = None,
    dest: Optional[Path] = None,
) -> dict:
    """Balanced benchmark subset plus the minimal corpus that covers it."""
    config.validate_paths()
    per_domain = per_domain if per_domain is not None else config.mini_per_domain
    corpus = load_corpus(config.corpus_root)
    benchmark = load_benchmarks(config.benchmark_paths(), corpus)
    subset = sample_mini(benchmark, per_domain, config.seed)

    ctx = RunContext(config, "sample-mini")
    try:
        dest = Path(dest) if dest else ctx.run_dir / "mini"
        if dest.exists() and any(dest.iterdir()):
            raise ValidationError(f"destination {dest} already exists and is not empty")

        by_domain: dict[str, list[QAPair]] = {}
        for qa in subset.qa_pairs:
            by_domain.setdefault(qa.domain, []).append(qa)
        bench_dir = dest / "benchmarks"
        bench_dir.mkdir(parents=True, exist_ok=True)
        for domain in sorted(by_domain):
            path = bench_dir / f"{domain}.json"
            write_benchmark(by_domain[domain], path)
            ctx._record(path)
        corpus_dir = dest / "corpus"
        for doc_id in sorted(subset.selected_docs):
            doc = corpus.get(doc_id)
            path = corpus_dir / doc_id
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(doc.text, encoding="utf-8")
            ctx._record(path)

        summary = {
            "per_domain": subset.per_domain_count,
            "n_qa_pairs": len(subset.qa_pairs),
            "n_docs": len(subset.selected_docs),
            "corpus_dir": str(corpus_dir),
            "benchmark_dir": str(bench_dir),
        }
        ctx.write_json("sample_summary.json", summary)
        ctx.finish()
        summary["run_dir"] = str(ctx.run_dir)
        return summary
    except BaseException:
        ctx.finish()
        raise
