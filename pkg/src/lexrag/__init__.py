"""Adaptive retrieval-augmented answering over legal document collections.

The package is organised around a linear pipeline — corpus loading,
chunking, indexing, query translation, retrieval, generation — with a
benchmark harness (span-overlap retrieval metrics, judge-based and
lexical generation metrics) layered on top. ``lexrag.pipeline`` wires
the stages together; the ``lexrag`` console script exposes them.
"""

from .chunking import Chunk, ChunkingConfig, chunk_document
from .config import PipelineConfig, config_from_dict, load_config, save_config
from .corpus import (
    Corpus,
    Document,
    GroundTruthSnippet,
    QAPair,
    load_benchmark,
    load_benchmarks,
    load_corpus,
    sample_mini,
    write_benchmark,
)
from .embedding import (
    EmbeddingBackend,
    HashedNgramBackend,
    HashedTokenBackend,
    backend_from_config,
    embed_batch,
)
from .errors import (
    CorpusLoadError,
    IntegrityError,
    LexRagError,
    ProvenanceError,
    SamplingError,
    TemplateError,
    TransportError,
    ValidationError,
)
from .generation import GenerationRecord, PromptTemplate, generate_answer, load_template, render_prompt, run_matrix
from .generation_metrics import (
    aggregate_metrics,
    answer_relevancy,
    bertscore_f1,
    faithfulness,
    rouge_recall,
    score_record,
)
from .index import (
    BM25Index,
    ScoredChunk,
    VectorIndex,
    bm25_search,
    build_index,
    cosine_search,
    load_index,
    rerank,
    save_index,
)
from .llm import LLMClient, MockLLMClient, OpenAIChatClient, ScriptedLLMClient, llm_from_config
from .retrieval_metrics import (
    PRCurve,
    RetrievalRun,
    VariantLabels,
    evaluate_run,
    precision_at_k,
    recall_at_k,
    span_overlap,
)
from .translate import (
    KPolicy,
    QueryAnalysis,
    ThresholdTable,
    analyze_query,
    choose_k,
    classify_expertise,
    dale_chall,
    default_thresholds,
    match_file,
    simple_extract,
)

__version__ = "0.1.0"

__all__ = [
    "BM25Index",
    "Chunk",
    "ChunkingConfig",
    "Corpus",
    "CorpusLoadError",
    "Document",
    "EmbeddingBackend",
    "GenerationRecord",
    "GroundTruthSnippet",
    "HashedNgramBackend",
    "HashedTokenBackend",
    "IntegrityError",
    "KPolicy",
    "LLMClient",
    "LexRagError",
    "MockLLMClient",
    "OpenAIChatClient",
    "PipelineConfig",
    "PRCurve",
    "PromptTemplate",
    "ProvenanceError",
    "QAPair",
    "QueryAnalysis",
    "RetrievalRun",
    "SamplingError",
    "ScoredChunk",
    "ScriptedLLMClient",
    "TemplateError",
    "ThresholdTable",
    "TransportError",
    "ValidationError",
    "VariantLabels",
    "VectorIndex",
    "aggregate_metrics",
    "analyze_query",
    "answer_relevancy",
    "backend_from_config",
    "bertscore_f1",
    "bm25_search",
    "build_index",
    "choose_k",
    "chunk_document",
    "classify_expertise",
    "config_from_dict",
    "cosine_search",
    "dale_chall",
    "default_thresholds",
    "embed_batch",
    "evaluate_run",
    "faithfulness",
    "generate_answer",
    "llm_from_config",
    "load_benchmark",
    "load_benchmarks",
    "load_config",
    "load_corpus",
    "load_index",
    "load_template",
    "match_file",
    "precision_at_k",
    "recall_at_k",
    "render_prompt",
    "rerank",
    "rouge_recall",
    "run_matrix",
    "sample_mini",
    "save_config",
    "save_index",
    "score_record",
    "simple_extract",
    "span_overlap",
    "write_benchmark",
    "__version__",
]
