"""Embedding and chat-completion backends.

Two backends share one surface (``embed_batch`` / ``complete``):

* ``ScriptedBackend`` is deterministic and offline. Embeddings are hashed
  bag-of-words histograms; completions come from an ordered list of
  substring rules (first match wins).
* ``LiveBackend`` speaks the OpenAI-compatible HTTP protocol.

Role-specific wrappers (generator, summarizer, router, judge) are plain
``ChatModel`` objects binding a backend to ``CompletionParams``.
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, TypeVar

import httpx

from agentrag.errors import (
    ConfigurationError,
    GatewayError,
    LoadError,
    ProviderError,
    TransportError,
    ValidationError,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")

NORM_TOLERANCE = 1e-6
DEFAULT_SCRIPTED_DIMENSION = 256
DEFAULT_MAX_IN_FLIGHT = 4


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    @property
    def dimension(self) -> int:
        return len(self.values)

    @classmethod
    def normalized(cls, raw: Sequence[float]) -> EmbeddingVector:
        """L2-normalize ``raw``; a zero vector is rejected."""
        norm = math.sqrt(math.fsum(float(x) * float(x) for x in raw))
        if norm == 0.0:
            raise ValidationError("cannot normalize a zero embedding vector")
        return cls(tuple(float(x) / norm for x in raw))


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValidationError(f"unknown chat role {self.role!r}")
        if self.role in ("system", "user") and not self.content.strip():
            raise ValidationError(f"{self.role} message content must be non-empty")


@dataclass(frozen=True)
class CompletionParams:
    model_name: str = "gpt-3.5-turbo"
    # None means "provider default": the field is left out of the request.
    temperature: float | None = None
    max_tokens: int | None = None

    def __post_init__(self) -> None:
        if self.temperature is not None and self.temperature < 0:
            raise ValidationError("temperature must be >= 0")
        if self.max_tokens is not None and self.max_tokens <= 0:
            raise ValidationError("max_tokens must be positive")


class Backend(Protocol):
    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...

    def complete(self, messages: Sequence[ChatMessage], params: CompletionParams) -> str: ...


def render_prompt(messages: Sequence[ChatMessage]) -> str:
    """Flatten a conversation into the single string scripted rules match against."""
    return "\n".join(m.content for m in messages)


def _check_messages(messages: Sequence[ChatMessage]) -> None:
    if not messages:
        raise ValidationError("messages must be non-empty")
    if messages[-1].role != "user":
        raise ValidationError("the last message must come from the user")


def _check_texts(texts: Sequence[str]) -> None:
    if not texts:
        raise ValidationError("texts must be non-empty")
    for i, text in enumerate(texts):
        if not text or not text.strip():
            raise ValidationError(f"text {i} is empty")


def with_retry(
    op: Callable[[], T],
    max_attempts: int = 3,
    base_delay: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> T:
    """Call ``op`` until it succeeds, retrying only retryable gateway errors.

    The wait after failed attempt ``i`` (0-based) is ``base_delay * 2**i``.
    Whatever error ends the loop is re-raised with ``attempts`` set to the
    number of calls made.
    """
    if max_attempts < 1:
        raise ValidationError("max_attempts must be >= 1")
    attempt = 0
    while True:
        attempt += 1
        try:
            return op()
        except GatewayError as exc:
            exc.attempts = attempt
            if not exc.retryable or attempt >= max_attempts:
                raise
            delay = base_delay * 2 ** (attempt - 1)
            logger.warning("retryable gateway error (attempt %d/%d): %s", attempt, max_attempts, exc)
            sleep(delay)


def fnv1a_32(data: bytes) -> int:
    h = 0x811C9DC5
    for byte in data:
        h ^= byte
        h = (h * 0x01000193) & 0xFFFFFFFF
    return h


def hashed_bag_of_words(text: str, dimension: int) -> list[float]:
    hist = [0.0] * dimension
    for token in text.split():
        hist[fnv1a_32(token.encode("utf-8")) % dimension] += 1.0
    return hist


@dataclass(frozen=True)
class ScriptedRule:
    """Respond with ``response`` when every substring in ``match`` occurs in the prompt.

    ``response`` may also be a callable receiving the rendered prompt; this is
    only available from Python, not from transcript files.
    """

    match: tuple[str, ...]
    response: str | Callable[[str], str]

    def matches(self, prompt: str) -> bool:
        return all(m in prompt for m in self.match)

    def reply(self, prompt: str) -> str:
        return self.response(prompt) if callable(self.response) else self.response


def rule(match: str | Sequence[str], response: str | Callable[[str], str]) -> ScriptedRule:
    if isinstance(match, str):
        match = (match,)
    return ScriptedRule(tuple(match), response)


@dataclass
class CallRecord:
    kind: str  # "embed" | "complete"
    model: str
    prompt: str
    response: str


class ScriptedBackend:
    """Offline, deterministic backend for tests and dry runs."""

    def __init__(
        self,
        rules: Sequence[ScriptedRule] = (),
        dimension: int = DEFAULT_SCRIPTED_DIMENSION,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
    ) -> None:
        if dimension <= 0:
            raise ValidationError("embedding dimension must be positive")
        self.rules = tuple(rules)
        self.dimension = dimension
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._lock = threading.Lock()
        self.calls: list[CallRecord] = []

    @classmethod
    def from_file(cls, path: str | Path, max_in_flight: int = DEFAULT_MAX_IN_FLIGHT) -> ScriptedBackend:
        """Load a transcript file.

        Format: ``{"embedding_dimension": d, "rules": [{"match": str | [str, ...], "response": str}]}``.
        """
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise LoadError(f"transcript not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise LoadError(f"transcript {path} is not valid JSON: {exc}") from None
        try:
            rules = [rule(r["match"], str(r["response"])) for r in raw["rules"]]
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"transcript {path}: malformed rule list ({exc})") from None
        dimension = int(raw.get("embedding_dimension", DEFAULT_SCRIPTED_DIMENSION))
        return cls(rules, dimension=dimension, max_in_flight=max_in_flight)

    def _record(self, rec: CallRecord) -> None:
        with self._lock:
            self.calls.append(rec)

    def completions(self, model: str | None = None) -> list[CallRecord]:
        with self._lock:
            return [c for c in self.calls if c.kind == "complete" and (model is None or c.model == model)]

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        _check_texts(texts)
        with self._slots:
            vectors = [EmbeddingVector.normalized(hashed_bag_of_words(t, self.dimension)) for t in texts]
        for t in texts:
            self._record(CallRecord("embed", "scripted-embedding", t, ""))
        return vectors

    def complete(self, messages: Sequence[ChatMessage], params: CompletionParams) -> str:
        _check_messages(messages)
        prompt = render_prompt(messages)
        with self._slots:
            for r in self.rules:
                if r.matches(prompt):
                    reply = r.reply(prompt)
                    break
            else:
                preview = prompt if len(prompt) <= 200 else prompt[:200] + "..."
                raise ConfigurationError(f"no scripted rule matches prompt: {preview!r}")
        self._record(CallRecord("complete", params.model_name, prompt, reply))
        return reply


class LiveBackend:
    """OpenAI-compatible HTTP backend (``/v1/embeddings`` and ``/v1/chat/completions``)."""

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        embedding_model: str = "text-embedding-3-small",
        timeout: float = 60.0,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        max_attempts: int = 3,
        base_delay: float = 1.0,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        base_url = base_url or os.environ.get("RAG_BASE_URL")
        api_key = api_key or os.environ.get("RAG_API_KEY")
        if not base_url:
            raise ConfigurationError("live backend needs a base URL (config or RAG_BASE_URL)")
        if not api_key:
            raise ConfigurationError("live backend needs an API key in RAG_API_KEY")
        base_url = base_url.rstrip("/")
        if base_url.endswith("/v1"):
            base_url = base_url[: -len("/v1")]
        self.base_url = base_url
        self.embedding_model = embedding_model
        self.max_attempts = max_attempts
        self.base_delay = base_delay
        self.dimension: int | None = None
        self._dim_lock = threading.Lock()
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._client = httpx.Client(
            timeout=timeout,
            headers={"Authorization": f"Bearer {api_key}"},
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def _post(self, path: str, payload: dict) -> dict:
        url = f"{self.base_url}{path}"

        def once() -> dict:
            with self._slots:
                try:
                    resp = self._client.post(url, json=payload)
                except httpx.TransportError as exc:
                    raise TransportError(f"POST {path} failed: {exc}") from exc
            if resp.status_code == 429 or resp.status_code >= 500:
                raise TransportError(f"POST {path} returned HTTP {resp.status_code}")
            try:
                body = resp.json()
            except ValueError:
                raise ProviderError(f"POST {path} returned non-JSON body (HTTP {resp.status_code})") from None
            if resp.status_code >= 400 or "error" in body:
                err = body.get("error", body)
                message = err.get("message", str(err)) if isinstance(err, dict) else str(err)
                raise ProviderError(f"provider error from {path}: {message}")
            return body

        return with_retry(once, self.max_attempts, self.base_delay)

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        _check_texts(texts)
        body = self._post("/v1/embeddings", {"model": self.embedding_model, "input": list(texts)})
        try:
            items = sorted(body["data"], key=lambda d: d.get("index", 0))
            vectors = [EmbeddingVector.normalized(item["embedding"]) for item in items]
        except (KeyError, TypeError) as exc:
            raise ProviderError(f"malformed embeddings response: {exc}") from None
        if len(vectors) != len(texts):
            raise ProviderError(f"expected {len(texts)} embeddings, got {len(vectors)}")
        with self._dim_lock:
            for v in vectors:
                if self.dimension is None:
                    self.dimension = v.dimension
                elif v.dimension != self.dimension:
                    raise ValidationError(
                        f"embedding dimension changed from {self.dimension} to {v.dimension}"
                    )
        return vectors

    def complete(self, messages: Sequence[ChatMessage], params: CompletionParams) -> str:
        _check_messages(messages)
        payload: dict = {
            "model": params.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
        }
        if params.temperature is not None:
            payload["temperature"] = params.temperature
        if params.max_tokens is not None:
            payload["max_tokens"] = params.max_tokens
        body = self._post("/v1/chat/completions", payload)
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed chat completion response: {exc}") from None
        return content or ""


@dataclass
class ChatModel:
    """A backend bound to one model configuration, e.g. the judge or the router."""

    backend: Backend
    params: CompletionParams = field(default_factory=CompletionParams)
    system: str | None = None

    def chat(self, messages: Sequence[ChatMessage]) -> str:
        msgs = list(messages)
        if self.system:
            msgs.insert(0, ChatMessage("system", self.system))
        return self.backend.complete(msgs, self.params)

    def ask(self, prompt: str) -> str:
        return self.chat([ChatMessage("user", prompt)])
