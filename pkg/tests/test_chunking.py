import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexrag.chunking import Chunk, ChunkingConfig, chunk_document, chunk_naive, chunk_rcts
from lexrag.corpus import Document
from lexrag.errors import ValidationError

# a newline-heavy alphabet produces natural paragraph breaks ("\n\n")
text_strategy = st.text(alphabet="abcdef .\n", min_size=1, max_size=800)


def assert_partition(doc, chunks, max_chars):
    """Spans must tile [0, len) exactly, in order, within the size cap."""
    assert chunks, "nonempty document must produce chunks"
    pos = 0
    for chunk in chunks:
        assert chunk.start == pos
        assert chunk.end > chunk.start
        assert chunk.length <= max_chars
        assert chunk.text == doc.text[chunk.start : chunk.end]
        pos = chunk.end
    assert pos == len(doc.text)
    assert "".join(c.text for c in chunks) == doc.text


class TestNaive:
    def test_exact_multiples(self):
        doc = Document(doc_id="d", text="abcdefgh")
        chunks = chunk_naive(doc, max_chars=4)
        assert [(c.start, c.end) for c in chunks] == [(0, 4), (4, 8)]

    def test_remainder_chunk(self):
        doc = Document(doc_id="d", text="abcdefghij")
        chunks = chunk_naive(doc, max_chars=4)
        assert [(c.start, c.end) for c in chunks] == [(0, 4), (4, 8), (8, 10)]

    def test_doc_shorter_than_max(self):
        doc = Document(doc_id="d", text="ab")
        chunks = chunk_naive(doc, max_chars=500)
        assert [(c.start, c.end) for c in chunks] == [(0, 2)]

    def test_invalid_max_chars(self):
        doc = Document(doc_id="d", text="ab")
        with pytest.raises(ValidationError):
            chunk_naive(doc, max_chars=0)


class TestRcts:
    def test_prefers_paragraph_boundaries(self):
        doc = Document(doc_id="d", text="para one.\n\npara two.\n\npara three.")
        chunks = chunk_rcts(doc, ChunkingConfig(strategy="rcts", max_chars=15))
        # no chunk may straddle a paragraph break when splitting there suffices
        assert_partition(doc, chunks, 15)
        for c in chunks:
            assert "\n\npara" not in c.text.strip("\n")

    def test_single_long_word_falls_back_to_chars(self):
        doc = Document(doc_id="d", text="x" * 37)
        chunks = chunk_rcts(doc, ChunkingConfig(strategy="rcts", max_chars=10))
        assert_partition(doc, chunks, 10)

    def test_merges_tiny_pieces(self):
        doc = Document(doc_id="d", text="a b c d e f g h")
        chunks = chunk_rcts(doc, ChunkingConfig(strategy="rcts", max_chars=10))
        assert_partition(doc, chunks, 10)
        # merging should keep the chunk count well below one-per-word
        assert len(chunks) <= 3


class TestChunkDocument:
    def test_strategy_dispatch(self, tiny_doc):
        naive = chunk_document(tiny_doc, ChunkingConfig(strategy="naive", max_chars=50))
        rcts = chunk_document(tiny_doc, ChunkingConfig(strategy="rcts", max_chars=50))
        assert_partition(tiny_doc, naive, 50)
        assert_partition(tiny_doc, rcts, 50)
        assert all(c.length == 50 for c in naive[:-1])

    def test_unknown_strategy(self, tiny_doc):
        with pytest.raises(ValidationError):
            ChunkingConfig(strategy="semantic", max_chars=50)

    def test_chunk_id_format(self, tiny_doc):
        chunks = chunk_document(tiny_doc, ChunkingConfig(strategy="naive", max_chars=64))
        assert chunks[0].chunk_id == "contracts/acme.txt:0-64"

    def test_label(self):
        assert ChunkingConfig(strategy="rcts", max_chars=500).label == "rcts500"

    @given(text=text_strategy, max_chars=st.integers(1, 120))
    @settings(max_examples=120, deadline=None)
    def test_partition_property_both_strategies(self, text, max_chars):
        doc = Document(doc_id="d", text=text)
        for strategy in ("naive", "rcts"):
            cfg = ChunkingConfig(strategy=strategy, max_chars=max_chars)
            assert_partition(doc, chunk_document(doc, cfg), max_chars)


class TestChunkDataclass:
    def test_span_text_consistency_enforced(self):
        with pytest.raises(ValidationError):
            Chunk(doc_id="d", start=0, end=5, text="toolong!")

    def test_span_property(self):
        c = Chunk(doc_id="d", start=2, end=5, text="abc")
        assert c.span == (2, 5)
        assert c.length == 3
