import json
import math

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentrag.errors import ConfigurationError, ProviderError, TransportError, ValidationError
from agentrag.gateway import (
    ChatMessage,
    ChatModel,
    CompletionParams,
    EmbeddingVector,
    LiveBackend,
    ScriptedBackend,
    fnv1a_32,
    hashed_bag_of_words,
    rule,
    with_retry,
)
from oracles import fnv1a


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    return math.fsum(x * y for x, y in zip(a.values, b.values))


def test_fnv1a_known_vectors():
    # published FNV-1a 32-bit test values
    assert fnv1a_32(b"") == 0x811C9DC5
    assert fnv1a_32(b"a") == 0xE40C292C
    assert fnv1a_32(b"foobar") == 0xBF9CF968


def test_scripted_embedding_deterministic_and_unit_norm():
    be = ScriptedBackend(dimension=16)
    v1, v2 = be.embed_batch(["the same text", "the same text"])
    assert v1 == v2
    assert abs(math.fsum(x * x for x in v1.values) - 1.0) <= 1e-6


def test_alpha_and_alpha_alpha_are_parallel():
    be = ScriptedBackend(dimension=8)
    a, aa = be.embed_batch(["alpha", "alpha alpha"])
    # hand computation: one bucket holds 1 (resp. 2); normalizing both gives the same basis vector
    bucket = fnv1a(b"alpha") % 8
    expected = tuple(1.0 if i == bucket else 0.0 for i in range(8))
    assert a.values == expected and aa.values == expected
    assert cosine(a, aa) == pytest.approx(1.0, abs=1e-6)


def test_embedding_rejects_empty_text():
    be = ScriptedBackend()
    with pytest.raises(ValidationError):
        be.embed_batch(["ok", "   "])
    with pytest.raises(ValidationError):
        be.embed_batch([])
    with pytest.raises(ValidationError):
        EmbeddingVector.normalized([0.0, 0.0])


@settings(max_examples=1000, deadline=None)
@given(st.text(min_size=1).filter(lambda s: s.split()), st.integers(1, 64))
def test_scripted_embedding_is_pure(text, dim):
    a = ScriptedBackend(dimension=dim).embed_batch([text])[0]
    b = ScriptedBackend(dimension=dim).embed_batch([text])[0]
    assert a == b and a.dimension == dim


@settings(max_examples=200, deadline=None)
@given(st.lists(st.text(alphabet="abcdefgh", min_size=1, max_size=5), min_size=1, max_size=12), st.randoms())
def test_embedding_order_insensitive(tokens, rnd):
    shuffled = list(tokens)
    rnd.shuffle(shuffled)
    be = ScriptedBackend(dimension=32)
    a, b = be.embed_batch([" ".join(tokens), " ".join(shuffled)])
    assert hashed_bag_of_words(" ".join(tokens), 32) == hashed_bag_of_words(" ".join(shuffled), 32)
    assert cosine(a, b) == pytest.approx(1.0, abs=1e-12)


def user(text):
    return [ChatMessage("user", text)]


def test_scripted_rule_match_and_first_wins():
    be = ScriptedBackend(
        [rule("Act as a safety engineer", "If rain, shall not ..."), rule("safety", "second")]
    )
    params = CompletionParams()
    assert be.complete(user("Act as a safety engineer, please"), params) == "If rain, shall not ..."
    assert be.complete(user("safety only"), params) == "second"


def test_scripted_multi_substring_rule():
    be = ScriptedBackend([rule(["alpha", "beta"], "both"), rule("alpha", "one")])
    assert be.complete(user("alpha and beta"), CompletionParams()) == "both"
    assert be.complete(user("alpha only"), CompletionParams()) == "one"


def test_scripted_no_match_is_configuration_error():
    be = ScriptedBackend([rule("x", "y")])
    with pytest.raises(ConfigurationError, match="no scripted rule"):
        be.complete(user("unmatched prompt"), CompletionParams())


def test_messages_must_end_with_user_and_be_nonempty():
    be = ScriptedBackend([rule("", "ok")])
    with pytest.raises(ValidationError):
        be.complete([], CompletionParams())
    with pytest.raises(ValidationError):
        be.complete([ChatMessage("user", "q"), ChatMessage("assistant", "a")], CompletionParams())
    with pytest.raises(ValidationError):
        ChatMessage("user", "")


def test_transcript_file_roundtrip(tmp_path):
    path = tmp_path / "t.json"
    path.write_text(json.dumps({"embedding_dimension": 12, "rules": [{"match": ["a", "b"], "response": "ab"}]}))
    be = ScriptedBackend.from_file(path)
    assert be.dimension == 12
    assert ChatModel(be).ask("a b") == "ab"
    assert be.completions()[0].prompt == "a b"


class Flaky:
    def __init__(self, failures, exc_type=TransportError):
        self.failures = failures
        self.calls = 0
        self.exc_type = exc_type

    def __call__(self):
        self.calls += 1
        if self.calls <= self.failures:
            raise self.exc_type("boom")
        return "ok"


def test_retry_success_first_attempt():
    op, sleeps = Flaky(0), []
    assert with_retry(op, 3, 0.1, sleep=sleeps.append) == "ok"
    assert op.calls == 1 and sleeps == []


def test_retry_two_transient_failures_then_success():
    op, sleeps = Flaky(2), []
    assert with_retry(op, 3, 0.1, sleep=sleeps.append) == "ok"
    assert op.calls == 3
    assert sleeps == pytest.approx([0.1, 0.2])


def test_retry_non_retryable_short_circuits():
    op = Flaky(5, ProviderError)
    with pytest.raises(ProviderError) as info:
        with_retry(op, 3, 0.0, sleep=lambda s: None)
    assert op.calls == 1 and info.value.attempts == 1


def test_retry_exhaustion_annotates_attempts():
    op = Flaky(5)
    with pytest.raises(TransportError) as info:
        with_retry(op, 3, 0.0, sleep=lambda s: None)
    assert op.calls == 3 and info.value.attempts == 3
    assert "after 3 attempts" in str(info.value)


def live(handler, **kw):
    return LiveBackend(
        base_url="http://llm.test/v1",
        api_key="k",
        transport=httpx.MockTransport(handler),
        base_delay=0.0,
        **kw,
    )


def test_live_chat_wire_format_omits_default_temperature():
    seen = []

    def handler(request):
        seen.append((request.url.path, request.headers["authorization"], json.loads(request.content)))
        return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": "hi"}}]})

    be = live(handler)
    assert be.complete(user("q"), CompletionParams(model_name="m1")) == "hi"
    be.complete(user("q"), CompletionParams(model_name="m1", temperature=0.3, max_tokens=7))
    path, auth, body = seen[0]
    assert path == "/v1/chat/completions" and auth == "Bearer k"
    assert body == {"model": "m1", "messages": [{"role": "user", "content": "q"}]}
    assert seen[1][2]["temperature"] == 0.3 and seen[1][2]["max_tokens"] == 7


def test_live_embeddings_single_batched_request():
    seen = []

    def handler(request):
        body = json.loads(request.content)
        seen.append(body)
        data = [{"index": i, "embedding": [3.0, 4.0]} for i in range(len(body["input"]))]
        return httpx.Response(200, json={"data": data})

    be = live(handler, embedding_model="emb")
    vecs = be.embed_batch(["a", "b", "c"])
    assert len(seen) == 1 and seen[0] == {"model": "emb", "input": ["a", "b", "c"]}
    assert vecs[0].values == (0.6, 0.8) and be.dimension == 2


def test_live_dimension_change_is_detected():
    dims = iter([2, 3])

    def handler(request):
        return httpx.Response(200, json={"data": [{"index": 0, "embedding": [1.0] * next(dims)}]})

    be = live(handler)
    be.embed_batch(["a"])
    with pytest.raises(ValidationError, match="dimension"):
        be.embed_batch(["b"])


def test_live_retries_transport_then_surfaces_provider_error():
    calls = {"n": 0}

    def handler(request):
        calls["n"] += 1
        if calls["n"] == 1:
            raise httpx.ConnectError("refused")
        if calls["n"] == 2:
            return httpx.Response(503, json={})
        return httpx.Response(400, json={"error": {"message": "bad model"}})

    be = live(handler, max_attempts=5)
    with pytest.raises(ProviderError, match="bad model") as info:
        be.complete(user("q"), CompletionParams())
    assert calls["n"] == 3 and info.value.attempts == 3


def test_live_requires_url_and_key(monkeypatch):
    monkeypatch.delenv("RAG_BASE_URL", raising=False)
    monkeypatch.delenv("RAG_API_KEY", raising=False)
    with pytest.raises(ConfigurationError):
        LiveBackend()
    monkeypatch.setenv("RAG_BASE_URL", "http://x")
    with pytest.raises(ConfigurationError, match="RAG_API_KEY"):
        LiveBackend()
