import pytest

from lexrag.chunking import Chunk
from lexrag.corpus import GroundTruthSnippet, QAPair
from lexrag.errors import ValidationError
from lexrag.generation import (
    GenerationRecord,
    analysis_snapshot,
    generate_answer,
    load_template,
    read_records,
    run_matrix,
    write_records,
)
from lexrag.llm import MockLLMClient, ScriptedLLMClient
from lexrag.translate import QueryAnalysis


def _analysis(k=5, expertise="non_expert", readability=4.0):
    return QueryAnalysis(
        original="Acme NDA; what is the term?",
        question="what is the term?",
        doc_reference="Acme NDA",
        matched_doc="d.txt",
        match_similarity=0.9,
        expertise=expertise,
        readability=readability,
        specificity="verbose",
        chosen_k=k,
    )


def _chunks(*texts):
    out, pos = [], 0
    for t in texts:
        out.append(Chunk(doc_id="d.txt", start=pos, end=pos + len(t), text=t))
        pos += len(t)
    return out


def _qa(qa_id="q1"):
    return QAPair(
        qa_id=qa_id,
        query="Acme NDA; what is the term?",
        snippets=(GroundTruthSnippet(doc_id="d.txt", start=0, end=4, quote="The "),),
        domain="contractnli",
    )


class TestGenerateAnswer:
    def test_record_contents(self):
        template = load_template("baseline")
        record = generate_answer(
            MockLLMClient(mode="extractive"),
            _analysis(k=2),
            _chunks("The term is five years.", "Other clause text."),
            template,
            qa_id="q1",
            k=2,
            k_mode="fixed",
        )
        assert record.qa_id == "q1"
        assert record.k == 2 and record.k_mode == "fixed"
        assert record.template == "baseline"
        assert record.template_hash == template.digest
        assert record.model == "mock-extractive"
        assert record.context_ids == ("d.txt:0-23", "d.txt:23-41")
        assert "five years" in record.response
        assert not record.failed
        assert record.record_id == "q1__baseline__mock-extractive__k2"

    def test_adaptive_k_comes_from_analysis(self):
        record = generate_answer(
            MockLLMClient(mode="constant"),
            _analysis(k=3),
            _chunks("a", "b", "c", "d", "e"),
            load_template("baseline"),
            qa_id="q1",
        )
        assert record.k == 3
        assert record.k_mode == "adaptive"
        assert len(record.context_ids) == 3
        assert record.record_id.endswith("__k3_adaptive")

    def test_transport_failure_yields_failed_record(self):
        record = generate_answer(
            MockLLMClient(mode="failing"),
            _analysis(k=1),
            _chunks("ctx"),
            load_template("baseline"),
            qa_id="q1",
            k=1,
            k_mode="fixed",
        )
        assert record.failed
        assert record.response == ""
        assert "transport" in record.error.lower() or "mock" in record.error.lower()

    def test_context_budget_truncates_tail(self):
        long_chunks = _chunks("x" * 900, "y" * 900, "z" * 900)
        record = generate_answer(
            MockLLMClient(mode="constant"),
            _analysis(k=3),
            long_chunks,
            load_template("baseline"),
            qa_id="q1",
            k=3,
            k_mode="fixed",
            max_context_chars=2000,
        )
        assert record.truncated
        assert len(record.context_ids) == 2

    def test_expert_audience_in_messages(self):
        record = generate_answer(
            MockLLMClient(mode="constant"),
            _analysis(expertise="expert", readability=9.5),
            _chunks("ctx"),
            load_template("baseline"),
            qa_id="q1",
            k=1,
        )
        assert any("legal expert" in m["content"] for m in record.messages)

    def test_round_trip_via_dict(self):
        record = generate_answer(
            MockLLMClient(mode="extractive"),
            _analysis(k=1),
            _chunks("The term is five years."),
            load_template("baseline"),
            qa_id="q1",
            k=1,
            k_mode="fixed",
        )
        clone = GenerationRecord.from_dict(record.to_dict())
        assert clone == record


class TestRunMatrix:
    def _setup(self):
        qa_pairs = [_qa("q1"), _qa("q2")]
        analyses = {"q1": _analysis(k=2), "q2": _analysis(k=4)}
        pool = _chunks("alpha one.", "beta two.", "gamma three.", "delta four.")

        def contexts_for(qa_id, k):
            return pool[:k]

        templates = [load_template("baseline"), load_template("custom_legal")]
        return qa_pairs, analyses, contexts_for, templates

    def test_cartesian_sweep_size(self):
        qa_pairs, analyses, contexts_for, templates = self._setup()
        records = run_matrix(
            qa_pairs, analyses, contexts_for, templates,
            [MockLLMClient(mode="constant")], ks=[1, 3],
        )
        # 2 queries x 2 templates x 1 client x 2 ks
        assert len(records) == 8
        assert all(r.k_mode == "fixed" for r in records)
        assert {r.k for r in records} == {1, 3}

    def test_adaptive_mode_uses_chosen_k(self):
        qa_pairs, analyses, contexts_for, templates = self._setup()
        records = run_matrix(
            qa_pairs, analyses, contexts_for, templates[:1],
            [MockLLMClient(mode="constant")], ks=(), adaptive=True,
        )
        assert len(records) == 2
        ks = {r.qa_id: r.k for r in records}
        assert ks == {"q1": 2, "q2": 4}
        assert all(r.k_mode == "adaptive" for r in records)

    def test_failures_do_not_abort_sweep(self):
        qa_pairs, analyses, contexts_for, templates = self._setup()
        script = ScriptedLLMClient(["ok"])
        records = run_matrix(
            qa_pairs, analyses, contexts_for, templates[:1],
            [MockLLMClient(mode="failing"), script], ks=[1],
        )
        failed = [r for r in records if r.failed]
        assert len(records) == 4
        assert len(failed) == 2
        assert all(r.model == "mock-failing" for r in failed)

    def test_missing_analysis_is_error(self):
        qa_pairs, analyses, contexts_for, templates = self._setup()
        del analyses["q2"]
        with pytest.raises(ValidationError):
            run_matrix(
                qa_pairs, analyses, contexts_for, templates[:1],
                [MockLLMClient(mode="constant")], ks=[1],
            )

    def test_empty_inputs_rejected(self):
        qa_pairs, analyses, contexts_for, templates = self._setup()
        with pytest.raises(ValidationError):
            run_matrix([], analyses, contexts_for, templates,
                       [MockLLMClient(mode="constant")], ks=[1])


class TestRecordPersistence:
    def test_jsonl_round_trip(self, tmp_path):
        qa_pairs = [_qa("q1")]
        analyses = {"q1": _analysis(k=1)}
        records = run_matrix(
            qa_pairs, analyses, lambda q, k: _chunks("one."),
            [load_template("baseline")], [MockLLMClient(mode="extractive")], ks=[1],
        )
        path = tmp_path / "records.jsonl"
        write_records(records, path)
        loaded = read_records(path)
        assert loaded == records

    def test_analysis_snapshot_is_plain_data(self):
        snap = analysis_snapshot(_analysis())
        assert snap["chosen_k"] == 5
        assert isinstance(snap, dict)
