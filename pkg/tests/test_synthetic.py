import pytest

from lexrag import synthetic
from lexrag.corpus import load_benchmark, load_corpus
from lexrag.errors import ValidationError


class TestGenerate:
    def test_same_seed_is_identical(self):
        a = synthetic.generate(seed=3, n_queries=20, docs_per_domain=2)
        b = synthetic.generate(seed=3, n_queries=20, docs_per_domain=2)
        assert a == b

    def test_different_seeds_differ(self):
        a = synthetic.generate(seed=1, n_queries=20, docs_per_domain=2)
        b = synthetic.generate(seed=2, n_queries=20, docs_per_domain=2)
        assert [d.text for d in a.docs] != [d.text for d in b.docs]

    def test_ground_truth_spans_match_text(self):
        data = synthetic.generate(seed=5, n_queries=40, docs_per_domain=3)
        docs = data.documents
        for q in data.queries:
            assert docs[q.doc_id][q.span[0] : q.span[1]] == q.answer
            assert q.answer.startswith("Clause ")

    def test_document_sizing_and_domains(self):
        data = synthetic.generate(seed=0, n_queries=10, docs_per_domain=2, min_doc_chars=2000)
        assert len(data.docs) == 8
        for doc in data.docs:
            domain = doc.doc_id.split("/", 1)[0]
            assert domain == doc.domain
            assert domain in synthetic.DOMAINS
            assert len(doc.text) >= 1999
        assert {d.domain for d in data.docs} == set(synthetic.DOMAINS)

    def test_queries_reference_their_document(self):
        data = synthetic.generate(seed=4, n_queries=24, docs_per_domain=2)
        by_id = {d.doc_id: d for d in data.docs}
        for q in data.queries:
            doc = by_id[q.doc_id]
            assert doc.party_a in q.query
            assert ";" in q.query

    def test_query_count_wraps_when_exhausted(self):
        data = synthetic.generate(seed=0, n_queries=130, docs_per_domain=5)
        assert len(data.queries) == 130

    def test_domain_coverage_at_scale(self):
        data = synthetic.generate(seed=7, n_queries=100, docs_per_domain=5)
        assert {q.domain for q in data.queries} == set(synthetic.DOMAINS)

    def test_validation(self):
        with pytest.raises(ValidationError):
            synthetic.generate(docs_per_domain=0)
        with pytest.raises(ValidationError):
            synthetic.generate(n_queries=0)
        with pytest.raises(ValidationError):
            synthetic.generate(docs_per_domain=6)


class TestWriteDataset:
    def test_round_trips_through_loaders(self, tmp_path):
        data = synthetic.generate(seed=9, n_queries=30, docs_per_domain=2)
        written = synthetic.write_dataset(data, tmp_path)
        assert len(written["corpus"]) == 8
        assert len(written["benchmarks"]) == 4

        corpus = load_corpus(tmp_path / "corpus")
        assert len(corpus) == 8
        total = 0
        for bench in written["benchmarks"]:
            qa_pairs = load_benchmark(bench, corpus)
            total += len(qa_pairs)
            for qa in qa_pairs:
                for s in qa.snippets:
                    assert corpus.get(s.doc_id).text[s.start : s.end] == s.quote
        assert total == 30

    def test_benchmark_files_are_per_domain(self, tmp_path):
        data = synthetic.generate(seed=9, n_queries=30, docs_per_domain=2)
        written = synthetic.write_dataset(data, tmp_path)
        names = sorted(p.rsplit("/", 1)[-1] for p in written["benchmarks"])
        assert names == ["contractnli.json", "cuad.json", "maud.json", "privacyqa.json"]
