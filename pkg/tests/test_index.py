import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexrag.chunking import Chunk, ChunkingConfig, chunk_document
from lexrag.corpus import Document
from lexrag.embedding import HashedNgramBackend, tokenize_words
from lexrag.errors import IntegrityError, ProvenanceError, TransportError, ValidationError
from lexrag.index import (
    BM25Index,
    EmbeddingReranker,
    IdentityReranker,
    ReverseReranker,
    Reranker,
    ScoredChunk,
    bm25_search,
    build_index,
    cosine_search,
    load_index,
    rerank,
    save_index,
)


def _chunk(doc_id, text, start=0):
    return Chunk(doc_id=doc_id, start=start, end=start + len(text), text=text)


def _mk_index(texts, dim=64):
    chunks = [_chunk(f"d{i}.txt", t) for i, t in enumerate(texts)]
    backend = HashedNgramBackend(dim=dim)
    return build_index(chunks, backend, ChunkingConfig(strategy="naive", max_chars=500)), backend


# ---------------------------------------------------------------------------
# BM25


def bm25_oracle(chunk_tokens, all_chunks_tokens, query_tokens, k1=1.5, b=0.75):
    """Straight-from-the-formula scalar evaluation, no shared code."""
    n_docs = len(all_chunks_tokens)
    avglen = sum(len(t) for t in all_chunks_tokens) / n_docs
    score = 0.0
    for term in query_tokens:
        df = sum(1 for toks in all_chunks_tokens if term in toks)
        tf = chunk_tokens.count(term)
        if tf == 0:
            continue
        idf = math.log((n_docs - df + 0.5) / (df + 0.5) + 1.0)
        score += idf * (tf * (k1 + 1)) / (tf + k1 * (1 - b + b * len(chunk_tokens) / avglen))
    return score


class TestBM25:
    def test_single_chunk_frozen_value(self):
        # "a a b" / query "a": idf = ln((1-1+0.5)/(1+0.5)+1) = ln(4/3),
        # tf-part = 2*2.5/(2+1.5) = 10/7; product = 0.410974389216828
        index = BM25Index([_chunk("d", "a a b")])
        score = index.score_one("a", 0)
        assert score == pytest.approx(0.410974389216828, abs=1e-9)

    def test_matches_independent_oracle_on_toy_corpus(self):
        rng = random.Random(13)
        vocab = ["term", "clause", "party", "notice", "breach", "law", "fee", "data"]
        texts = [
            " ".join(rng.choice(vocab) for _ in range(rng.randint(3, 12)))
            for _ in range(20)
        ]
        chunks = [_chunk(f"d{i}.txt", t) for i, t in enumerate(texts)]
        index = BM25Index(chunks)
        all_tokens = [tokenize_words(t) for t in texts]
        for query in ("clause notice", "breach", "party party fee", "absent"):
            q_tokens = tokenize_words(query)
            for i in range(20):
                expected = bm25_oracle(all_tokens[i], all_tokens, q_tokens)
                assert index.score_one(query, i) == pytest.approx(expected, abs=1e-9)

    def test_term_absent_everywhere_scores_zero(self):
        index = BM25Index([_chunk("a", "x y"), _chunk("b", "y z")])
        results = index.search("missing", 2)
        assert all(s.score == 0.0 for s in results)

    def test_tf_monotonicity(self):
        chunks = [_chunk("a", "law law other"), _chunk("b", "other text here")]
        index = BM25Index(chunks)
        results = index.search("law", 2)
        assert results[0].chunk.doc_id == "a"
        assert results[0].score > results[1].score

    def test_empty_query_warns_and_returns_nothing(self, caplog):
        index = BM25Index([_chunk("a", "x y")])
        with caplog.at_level("WARNING"):
            assert index.search("...", 3) == []
        assert any("token" in r.message for r in caplog.records)

    def test_scoped_search_rebuilds_statistics(self):
        # scoping must recompute idf/avglen over the scoped subset only
        chunks = [
            _chunk("keep.txt", "alpha beta gamma"),
            _chunk("keep.txt", "alpha alpha", start=20),
            _chunk("drop.txt", "alpha beta beta beta"),
        ]
        full = BM25Index(chunks)
        scoped = full.search("alpha beta", 3, scope="keep.txt")
        rebuilt = BM25Index([c for c in chunks if c.doc_id == "keep.txt"]).search(
            "alpha beta", 3
        )
        assert [(s.chunk.chunk_id, s.score) for s in scoped] == [
            (s.chunk.chunk_id, s.score) for s in rebuilt
        ]

    def test_one_shot_helper(self):
        chunks = [_chunk("a", "law text"), _chunk("b", "other words")]
        results = bm25_search(chunks, "law", 1)
        assert results[0].chunk.doc_id == "a"
        assert results[0].rank == 1

    def test_rank_sequence(self):
        chunks = [_chunk(f"d{i}", f"w{i} law") for i in range(5)]
        results = BM25Index(chunks).search("law", 4)
        assert [s.rank for s in results] == [1, 2, 3, 4]


# ---------------------------------------------------------------------------
# cosine search


class TestCosineSearch:
    def test_identical_vector_ranks_first_with_score_one(self):
        index, backend = _mk_index(["alpha beta", "gamma delta", "epsilon zeta"])
        query = backend.embed_one("alpha beta")
        results = cosine_search(index, query, 3)
        assert results[0].chunk.doc_id == "d0.txt"
        assert results[0].score == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal_query_scores_zero_in_tiebreak_order(self):
        chunks = [_chunk("b.txt", "xx"), _chunk("a.txt", "yy")]
        backend = HashedNgramBackend(dim=64)
        index = build_index(chunks, backend, ChunkingConfig())
        query = np.zeros(64)
        results = cosine_search(index, query, 2)
        assert [s.score for s in results] == [0.0, 0.0]
        assert [s.chunk.doc_id for s in results] == ["a.txt", "b.txt"]

    def test_two_dim_toy_scores(self):
        # hand-checkable 2-D case: chunks (1,0) and (0.6,0.8), query (1,0)
        chunks = [_chunk("c1", "u"), _chunk("c2", "v")]
        backend = HashedNgramBackend(dim=2)
        index = build_index(chunks, backend, ChunkingConfig())
        index = type(index)(
            chunks=index.chunks,
            vectors=np.array([[1.0, 0.0], [0.6, 0.8]]),
            backend_name=index.backend_name,
            chunking=index.chunking,
        )
        results = cosine_search(index, np.array([1.0, 0.0]), 2)
        assert [round(s.score, 9) for s in results] == [1.0, 0.6]

    def test_scope_filters_to_one_document(self):
        index, backend = _mk_index(["alpha beta", "alpha beta gamma"])
        query = backend.embed_one("alpha beta")
        results = cosine_search(index, query, 5, scope="d1.txt")
        assert {s.chunk.doc_id for s in results} == {"d1.txt"}

    def test_scope_with_no_chunks_warns_empty(self, caplog):
        index, backend = _mk_index(["alpha"])
        with caplog.at_level("WARNING"):
            assert cosine_search(index, backend.embed_one("alpha"), 3, scope="nope") == []

    def test_n_larger_than_index(self):
        index, backend = _mk_index(["alpha", "beta"])
        assert len(cosine_search(index, backend.embed_one("alpha"), 50)) == 2

    def test_invalid_n(self):
        index, backend = _mk_index(["alpha"])
        with pytest.raises(ValidationError):
            cosine_search(index, backend.embed_one("alpha"), 0)

    def test_wrong_query_dim(self):
        index, _ = _mk_index(["alpha"])
        with pytest.raises(ValidationError):
            cosine_search(index, np.zeros(3), 1)


# ---------------------------------------------------------------------------
# rerank


class _DropFirstReranker(Reranker):
    name = "drop-first"

    def rerank(self, query, candidates):
        return candidates[1:]


class _FailingReranker(Reranker):
    name = "failing"

    def rerank(self, query, candidates):
        raise TransportError("reranker endpoint down", attempts=3)


def _candidates(n):
    return [
        ScoredChunk(chunk=_chunk(f"d{i}", f"text {i}"), score=1.0 - i * 0.1, rank=i + 1)
        for i in range(n)
    ]


class TestRerank:
    def test_identity(self):
        cands = _candidates(3)
        out, fell_back = rerank(IdentityReranker(), "q", cands)
        assert [s.chunk.chunk_id for s in out] == [s.chunk.chunk_id for s in cands]
        assert not fell_back

    def test_reverse(self):
        cands = _candidates(3)
        out, _ = rerank(ReverseReranker(), "q", cands)
        assert [s.chunk.chunk_id for s in out] == [
            s.chunk.chunk_id for s in reversed(cands)
        ]
        assert [s.rank for s in out] == [1, 2, 3]

    def test_scores_non_increasing_and_ranks_resequenced(self):
        backend = HashedNgramBackend(dim=64)
        cands = [
            ScoredChunk(chunk=_chunk(f"d{i}", t), score=0.5, rank=i + 1)
            for i, t in enumerate(["alpha beta", "unrelated words", "alpha beta gamma"])
        ]
        out, fell_back = rerank(EmbeddingReranker(backend), "alpha beta", cands)
        assert not fell_back
        scores = [s.score for s in out]
        assert scores == sorted(scores, reverse=True)
        assert [s.rank for s in out] == [1, 2, 3]
        assert out[0].chunk.text == "alpha beta"

    def test_dropping_candidate_is_integrity_error(self):
        with pytest.raises(IntegrityError):
            rerank(_DropFirstReranker(), "q", _candidates(3))

    def test_transport_failure_falls_back_to_input_order(self):
        cands = _candidates(4)
        out, fell_back = rerank(_FailingReranker(), "q", cands)
        assert fell_back
        assert [s.chunk.chunk_id for s in out] == [s.chunk.chunk_id for s in cands]

    def test_empty_candidates_rejected(self):
        with pytest.raises(ValidationError):
            rerank(IdentityReranker(), "q", [])

    @given(st.integers(2, 8), st.integers(0, 1000))
    @settings(max_examples=30, deadline=None)
    def test_embedding_rerank_is_always_a_permutation(self, n, seed):
        rng = random.Random(seed)
        backend = HashedNgramBackend(dim=32)
        cands = [
            ScoredChunk(
                chunk=_chunk(f"d{i}", " ".join(rng.choice("abcdef") for _ in range(4))),
                score=rng.random(),
                rank=i + 1,
            )
            for i in range(n)
        ]
        out, _ = rerank(EmbeddingReranker(backend), "a b", cands)
        assert sorted(s.chunk.chunk_id for s in out) == sorted(
            s.chunk.chunk_id for s in cands
        )


# ---------------------------------------------------------------------------
# persistence


class TestSaveLoad:
    def test_round_trip_preserves_everything(self, tmp_path):
        index, _ = _mk_index(["alpha beta", "gamma delta"])
        path = tmp_path / "idx.json"
        save_index(index, path)
        loaded = load_index(path)
        assert [c.chunk_id for c in loaded.chunks] == [c.chunk_id for c in index.chunks]
        np.testing.assert_array_equal(loaded.vectors, index.vectors)
        assert loaded.backend_name == index.backend_name
        assert loaded.chunking == index.chunking

    def test_backend_provenance_enforced(self, tmp_path):
        index, _ = _mk_index(["alpha"])
        path = tmp_path / "idx.json"
        save_index(index, path)
        with pytest.raises(ProvenanceError):
            load_index(path, expected_backend="some-other-model")

    def test_corrupted_vector_row_rejected(self, tmp_path):
        index, _ = _mk_index(["alpha", "beta"])
        path = tmp_path / "idx.json"
        save_index(index, path)
        payload = json.loads(path.read_text())
        payload["items"][0]["vector"] = payload["items"][0]["vector"][:-2]
        path.write_text(json.dumps(payload))
        with pytest.raises((IntegrityError, ValidationError)):
            load_index(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError):
            load_index(tmp_path / "ghost.json")


class TestBuildIndex:
    def test_empty_chunks_rejected(self):
        with pytest.raises(ValidationError):
            build_index([], HashedNgramBackend(dim=8), ChunkingConfig())

    def test_duplicate_chunk_ids_rejected(self):
        c = _chunk("d", "same")
        with pytest.raises(ValidationError):
            build_index([c, c], HashedNgramBackend(dim=8), ChunkingConfig())

    def test_chunk_lookup(self, tiny_doc):
        cfg = ChunkingConfig(strategy="rcts", max_chars=80)
        chunks = chunk_document(tiny_doc, cfg)
        index = build_index(chunks, HashedNgramBackend(dim=16), cfg)
        cid = chunks[0].chunk_id
        assert index.chunk_by_id(cid) == chunks[0]
        with pytest.raises(ValidationError):
            index.chunk_by_id("nope:0-1")
