import pytest

from lexrag.chunking import Chunk
from lexrag.errors import IntegrityError, TemplateError, TransportError, ValidationError
from lexrag.generation import (
    AUDIENCE_DIRECTIVES,
    NO_CONTEXT_DISCLAIMER,
    PromptTemplate,
    format_contexts,
    load_template,
    render_prompt,
)
from lexrag.llm import (
    MockLLMClient,
    OpenAIChatClient,
    ScriptedLLMClient,
    llm_from_config,
)


def _chunks(*texts):
    out, pos = [], 0
    for t in texts:
        out.append(Chunk(doc_id="d.txt", start=pos, end=pos + len(t), text=t))
        pos += len(t)
    return out


class TestTemplates:
    def test_bundled_templates_load(self):
        for name in ("baseline", "cot", "custom_legal"):
            t = load_template(name)
            assert {"question", "contexts", "audience"} <= t.slots

    def test_unknown_template(self):
        with pytest.raises(TemplateError):
            load_template("nonexistent")

    def test_unknown_slot_rejected(self):
        with pytest.raises(TemplateError):
            PromptTemplate(name="bad", version=1, system="s", user="{mystery}")

    def test_digest_tracks_content(self):
        a = PromptTemplate(name="t", version=1, system="s", user="{question}")
        b = PromptTemplate(name="t", version=1, system="s!", user="{question}")
        assert a.digest != b.digest
        assert len(a.digest) == 12


class TestRenderPrompt:
    def test_contexts_numbered_and_delimited(self):
        template = load_template("baseline")
        chunks = _chunks("First chunk text.", "Second chunk text.")
        rendered = render_prompt(template, "What is the term?", chunks, "non_expert")
        assert [m["role"] for m in rendered.messages] == ["system", "user"]
        user = rendered.messages[1]["content"]
        assert "[Context 1: d.txt:0-17]\nFirst chunk text.\n[/Context 1]" in user
        assert "[Context 2: d.txt:17-35]\nSecond chunk text.\n[/Context 2]" in user
        assert user.index("[Context 1") < user.index("[Context 2")
        assert "Question: What is the term?" in user

    def test_context_text_verbatim(self):
        template = load_template("baseline")
        weird = "line one\n\n  spaced {not_a_slot} § 12(b)"
        rendered = render_prompt(
            template, "q?", _chunks(weird), "expert"
        )
        assert weird in rendered.messages[1]["content"]

    def test_audience_directive_switches(self):
        template = load_template("baseline")
        plain = render_prompt(template, "q?", _chunks("ctx"), "non_expert").text
        expert = render_prompt(template, "q?", _chunks("ctx"), "expert").text
        assert AUDIENCE_DIRECTIVES["non_expert"] in plain
        assert AUDIENCE_DIRECTIVES["expert"] in expert
        assert plain != expert

    def test_no_contexts_renders_disclaimer(self):
        template = load_template("baseline")
        rendered = render_prompt(template, "q?", [], "non_expert")
        assert NO_CONTEXT_DISCLAIMER in rendered.text

    def test_unknown_audience_rejected(self):
        with pytest.raises(ValidationError):
            render_prompt(load_template("baseline"), "q?", _chunks("c"), "wizard")

    def test_format_contexts_alignment(self):
        text = format_contexts(["id1", "id2"], ["aaa", "bbb"])
        assert text.split("\n\n")[0] == "[Context 1: id1]\naaa\n[/Context 1]"

    def test_format_contexts_length_mismatch(self):
        with pytest.raises(ValidationError):
            format_contexts(["id1"], ["a", "b"])


class TestMockLLM:
    def _messages(self, question="What is the term?", context="The term is five years. More text."):
        template = load_template("baseline")
        return render_prompt(
            template, question, _chunks(context), "non_expert"
        ).messages

    def test_extractive_takes_first_sentence_of_first_context(self):
        client = MockLLMClient(mode="extractive")
        out = client.complete(self._messages())
        assert out == "Regarding 'What is the term?': The term is five years."

    def test_echo_context(self):
        client = MockLLMClient(mode="echo_context")
        assert client.complete(self._messages()) == "The term is five years. More text."

    def test_noncommittal(self):
        assert MockLLMClient(mode="noncommittal").complete([]) == "I don't know."

    def test_constant(self):
        assert MockLLMClient(mode="constant", constant="42.").complete([]) == "42."

    def test_failing_raises_transport_error(self):
        with pytest.raises(TransportError):
            MockLLMClient(mode="failing").complete([])

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValidationError):
            MockLLMClient(mode="oracle")


class TestScriptedLLM:
    def test_replays_then_repeats_last(self):
        client = ScriptedLLMClient(["one", "two"])
        outs = [client.complete([{"role": "user", "content": str(i)}]) for i in range(4)]
        assert outs == ["one", "two", "two", "two"]
        assert len(client.calls) == 4

    def test_requires_responses(self):
        with pytest.raises(ValidationError):
            ScriptedLLMClient([])


class TestOpenAIChatClient:
    def _ok_body(self, text):
        return {"choices": [{"message": {"content": text}}]}

    def test_payload_and_response(self, monkeypatch):
        seen = {}

        def fake_post_json(endpoint, payload, **kwargs):
            seen["endpoint"] = endpoint
            seen["payload"] = payload
            return self._ok_body("answer text")

        monkeypatch.setattr("lexrag.llm.post_json", fake_post_json)
        client = OpenAIChatClient(endpoint="http://chat.test", model="m1", temperature=0.5)
        out = client.complete([{"role": "user", "content": "hi"}])
        assert out == "answer text"
        assert seen["payload"]["model"] == "m1"
        assert seen["payload"]["temperature"] == 0.5
        assert seen["payload"]["messages"] == [{"role": "user", "content": "hi"}]
        assert "max_tokens" not in seen["payload"]

    def test_max_tokens_included_when_set(self, monkeypatch):
        seen = {}

        def fake_post_json(endpoint, payload, **kwargs):
            seen["payload"] = payload
            return self._ok_body("x")

        monkeypatch.setattr("lexrag.llm.post_json", fake_post_json)
        OpenAIChatClient(
            endpoint="http://chat.test", model="m", max_tokens=64
        ).complete([])
        assert seen["payload"]["max_tokens"] == 64

    def test_malformed_body_is_integrity_error(self, monkeypatch):
        monkeypatch.setattr(
            "lexrag.llm.post_json", lambda *a, **k: {"choices": []}
        )
        client = OpenAIChatClient(endpoint="http://chat.test", model="m")
        with pytest.raises(IntegrityError):
            client.complete([])

    def test_transport_error_propagates(self, monkeypatch):
        def dead(*a, **k):
            raise TransportError("no route", attempts=3)

        monkeypatch.setattr("lexrag.llm.post_json", dead)
        client = OpenAIChatClient(endpoint="http://chat.test", model="m")
        with pytest.raises(TransportError):
            client.complete([])


class TestLLMFromConfig:
    def test_mock(self):
        client = llm_from_config({"kind": "mock", "mode": "noncommittal"})
        assert client.model_name == "mock-noncommittal"

    def test_http_requires_endpoint_and_model(self):
        with pytest.raises(ValidationError):
            llm_from_config({"kind": "http", "model": "m"})

    def test_scripted(self):
        client = llm_from_config({"kind": "scripted", "responses": ["a"]})
        assert client.complete([]) == "a"

    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            llm_from_config({"kind": "psychic"})
