import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexrag.embedding import (
    HashedNgramBackend,
    HashedTokenBackend,
    HTTPEmbeddingBackend,
    backend_from_config,
    embed_batch,
    token_backend_from_config,
    tokenize_words,
)
from lexrag.errors import TransportError, ValidationError


class TestTokenizer:
    def test_lowercase_alnum_runs(self):
        assert tokenize_words("The Party's 30-day notice!") == [
            "the", "party", "s", "30", "day", "notice",
        ]

    def test_empty(self):
        assert tokenize_words(" .,;! ") == []


class TestHashedNgram:
    def test_deterministic_across_instances(self):
        a = HashedNgramBackend(dim=64).embed_one("confidential information")
        b = HashedNgramBackend(dim=64).embed_one("confidential information")
        np.testing.assert_array_equal(a, b)

    def test_unit_norm(self):
        v = HashedNgramBackend(dim=128).embed_one("some legal text here")
        assert abs(np.linalg.norm(v) - 1.0) < 1e-9

    def test_empty_text_zero_vector(self):
        backend = HashedNgramBackend(dim=32)
        assert np.linalg.norm(backend.embed_one("")) == 0.0
        assert np.linalg.norm(backend.embed_one("   \n\t ")) == 0.0

    def test_batch_matches_single(self):
        backend = HashedNgramBackend(dim=64)
        batch = embed_batch(backend, ["alpha beta", "gamma"])
        np.testing.assert_array_equal(batch[0], backend.embed_one("alpha beta"))
        np.testing.assert_array_equal(batch[1], backend.embed_one("gamma"))

    def test_name_encodes_parameters(self):
        assert HashedNgramBackend(dim=256).name == "hash-ngram3-256"
        assert HashedNgramBackend(ngram=4, dim=64).name == "hash-ngram4-64"

    def test_similar_texts_score_higher(self):
        backend = HashedNgramBackend(dim=256)
        base = backend.embed_one("termination of the agreement")
        near = backend.embed_one("termination of this agreement")
        far = backend.embed_one("zzz qqq xxx")
        assert float(base @ near) > float(base @ far)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValidationError):
            embed_batch(HashedNgramBackend(dim=16), [])

    @given(st.text(max_size=60), st.text(max_size=60))
    @settings(max_examples=60, deadline=None)
    def test_norm_is_zero_or_one(self, a, b):
        backend = HashedNgramBackend(dim=32)
        for v in embed_batch(backend, [a + " x", b + " y"]):
            n = np.linalg.norm(v)
            assert n == 0.0 or abs(n - 1.0) < 1e-9


class TestHashedToken:
    def test_tokens_and_rows_align(self):
        tokens, mat = HashedTokenBackend(dim=32).embed_tokens("alpha beta gamma")
        assert tokens == ["alpha", "beta", "gamma"]
        assert mat.shape == (3, 32)

    def test_same_token_same_row(self):
        tokens, mat = HashedTokenBackend(dim=32).embed_tokens("alpha beta alpha")
        np.testing.assert_array_equal(mat[0], mat[2])

    def test_empty_text(self):
        tokens, mat = HashedTokenBackend(dim=32).embed_tokens("...")
        assert tokens == []
        assert mat.shape == (0, 32)


class _Resp:
    def __init__(self, payload, status=200):
        self._payload = payload
        self.status_code = status

    def raise_for_status(self):
        if self.status_code >= 400:
            import requests

            raise requests.HTTPError(f"status {self.status_code}")

    def json(self):
        return self._payload


def _embedding_payload(texts, dim=8):
    return {
        "data": [
            {"index": i, "embedding": [float(i + 1)] * dim}
            for i, _ in enumerate(texts)
        ]
    }


class TestHTTPBackend:
    def test_success_round_trip(self, monkeypatch):
        calls = []

        def fake_post(url, json=None, headers=None, timeout=None):
            calls.append((url, json))
            return _Resp(_embedding_payload(json["input"]))

        monkeypatch.setattr("lexrag._http.requests.post", fake_post)
        backend = HTTPEmbeddingBackend(
            endpoint="http://emb.test/v1/embeddings", model="m", dim=8
        )
        out = embed_batch(backend, ["a", "b"])
        assert out.shape == (2, 8)
        assert calls[0][1]["model"] == "m"
        assert backend.name == "m"

    def test_retries_then_succeeds(self, monkeypatch):
        import requests

        attempts = []

        def flaky_post(url, json=None, headers=None, timeout=None):
            attempts.append(1)
            if len(attempts) < 3:
                raise requests.ConnectionError("boom")
            return _Resp(_embedding_payload(json["input"]))

        monkeypatch.setattr("lexrag._http.requests.post", flaky_post)
        monkeypatch.setattr("lexrag._http.time.sleep", lambda s: None)
        backend = HTTPEmbeddingBackend(endpoint="http://emb.test", model="m", dim=8)
        out = embed_batch(backend, ["a"])
        assert out.shape == (1, 8)
        assert len(attempts) == 3

    def test_exhausted_retries_raise_transport_error(self, monkeypatch):
        import requests

        def dead_post(url, json=None, headers=None, timeout=None):
            raise requests.ConnectionError("down")

        monkeypatch.setattr("lexrag._http.requests.post", dead_post)
        monkeypatch.setattr("lexrag._http.time.sleep", lambda s: None)
        backend = HTTPEmbeddingBackend(endpoint="http://emb.test", model="m", dim=8)
        with pytest.raises(TransportError) as exc_info:
            embed_batch(backend, ["a"])
        assert exc_info.value.attempts == 3

    def test_wrong_dim_rejected(self, monkeypatch):
        monkeypatch.setattr(
            "lexrag._http.requests.post",
            lambda url, json=None, headers=None, timeout=None: _Resp(
                _embedding_payload(json["input"], dim=4)
            ),
        )
        monkeypatch.setattr("lexrag._http.time.sleep", lambda s: None)
        backend = HTTPEmbeddingBackend(endpoint="http://emb.test", model="m", dim=8)
        with pytest.raises((TransportError, ValidationError)):
            embed_batch(backend, ["a"])

    def test_bearer_token_from_env(self, monkeypatch):
        seen = {}

        def fake_post(url, json=None, headers=None, timeout=None):
            seen.update(headers)
            return _Resp(_embedding_payload(json["input"]))

        monkeypatch.setattr("lexrag._http.requests.post", fake_post)
        monkeypatch.setenv("LEXRAG_EMBED_TOKEN", "sekrit")
        backend = HTTPEmbeddingBackend(endpoint="http://emb.test", model="m", dim=8)
        embed_batch(backend, ["a"])
        assert seen.get("Authorization") == "Bearer sekrit"


class TestBackendFromConfig:
    def test_hashed_ngram_defaults(self):
        backend = backend_from_config({"kind": "hashed_ngram"})
        assert backend.name == "hash-ngram3-256"

    def test_http_kind(self):
        backend = backend_from_config(
            {"kind": "http", "endpoint": "http://x", "model": "m", "dim": 16}
        )
        assert backend.dim == 16

    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            backend_from_config({"kind": "quantum"})

    def test_token_backend(self):
        tb = token_backend_from_config({"kind": "hashed_token", "dim": 64})
        assert tb.name == "hash-token3-64"
