"""Application configuration: TOML file, then ``RAG_*`` environment overrides.

Secrets never live in the file; the API key is read from ``RAG_API_KEY`` only.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from agentrag.corpus import ChunkingConfig
from agentrag.errors import ConfigurationError, LoadError
from agentrag.gateway import (
    DEFAULT_MAX_IN_FLIGHT,
    Backend,
    ChatModel,
    CompletionParams,
    LiveBackend,
    ScriptedBackend,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_PATH_FIELDS = ("manifest", "index_dir", "transcript")


@dataclass(frozen=True)
class AppConfig:
    manifest: Path | None = None
    index_dir: Path = Path("index")
    chunk_size: int = 1024
    overlap: int = 200
    k: int = 3
    k_doc: int = 2
    branching: int = 10
    generator_model: str = "gpt-3.5-turbo"
    summarizer_model: str = "gpt-3.5-turbo"
    router_model: str = "gpt-3.5-turbo"
    judge_model: str = "gpt-3.5-turbo"
    embedding_model: str = "text-embedding-3-small"
    backend: str = "live"
    transcript: Path | None = None
    base_url: str | None = None
    n_runs: int = 10
    concurrency: int = DEFAULT_MAX_IN_FLIGHT
    extras: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def chunking(self) -> ChunkingConfig:
        return ChunkingConfig(self.chunk_size, self.overlap)

    def validate(self) -> AppConfig:
        if self.backend not in ("live", "scripted"):
            raise ConfigurationError(f"backend must be 'live' or 'scripted', got {self.backend!r}")
        if self.backend == "scripted" and self.transcript is None:
            raise ConfigurationError("the scripted backend needs a transcript path")
        if self.backend == "live":
            if not (self.base_url or os.environ.get("RAG_BASE_URL")):
                raise ConfigurationError("the live backend needs base_url or RAG_BASE_URL")
            if not os.environ.get("RAG_API_KEY"):
                raise ConfigurationError("the live backend needs RAG_API_KEY in the environment")
        self.chunking  # noqa: B018 - raises on an invalid chunk_size/overlap pair
        for name in ("k", "k_doc", "n_runs", "concurrency"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.branching < 2:
            raise ConfigurationError("branching must be >= 2")
        return self


def _coerce(name: str, value, base: Path | None):
    kind = {f.name: f for f in fields(AppConfig)}[name].type
    if name in _PATH_FIELDS:
        p = Path(value)
        return p if p.is_absolute() or base is None else base / p
    if "int" in str(kind):
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigurationError(f"{name} must be an integer, got {value!r}") from None
    return str(value)


def load_config(path: str | Path | None = None, env: dict[str, str] | None = None) -> AppConfig:
    """Read ``path`` (optional), apply ``RAG_<FIELD>`` env overrides, and return the config.

    Keys may sit at the top level or inside a ``[models]`` table
    (``generator``, ``summarizer``, ``router``, ``judge``, ``embedding``).
    Relative paths in the file resolve against the file's directory, and so
    does the default ``index_dir`` when a file is given.
    """
    env = os.environ if env is None else env
    known = {f.name for f in fields(AppConfig)} - {"extras"}
    values: dict = {}
    if path is not None:
        path = Path(path)
        try:
            raw = tomllib.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise LoadError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise LoadError(f"config file {path} is invalid: {exc}") from None
        models = raw.pop("models", {})
        for role, model in models.items():
            raw[f"{role}_model"] = model
        if "api_key" in raw:
            raise ConfigurationError("api_key must not be stored in the config file; use RAG_API_KEY")
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        values = {k: _coerce(k, v, path.parent) for k, v in raw.items()}
        values.setdefault("index_dir", path.parent / "index")
    for name in known:
        env_value = env.get(f"RAG_{name.upper()}")
        if env_value:
            values[name] = _coerce(name, env_value, None)
    return AppConfig(**values)


def override(cfg: AppConfig, **changes) -> AppConfig:
    """Apply non-None command-line overrides."""
    changes = {k: v for k, v in changes.items() if v is not None}
    return replace(cfg, **changes) if changes else cfg


@dataclass
class Models:
    backend: Backend
    generator: ChatModel
    summarizer: ChatModel
    router: ChatModel
    judge: ChatModel


def make_models(cfg: AppConfig) -> Models:
    if cfg.backend == "scripted":
        backend: Backend = ScriptedBackend.from_file(cfg.transcript, max_in_flight=cfg.concurrency)
    else:
        backend = LiveBackend(
            base_url=cfg.base_url,
            embedding_model=cfg.embedding_model,
            max_in_flight=cfg.concurrency,
        )

    def role(model_name: str) -> ChatModel:
        return ChatModel(backend, CompletionParams(model_name=model_name))

    return Models(
        backend=backend,
        generator=role(cfg.generator_model),
        summarizer=role(cfg.summarizer_model),
        router=role(cfg.router_model),
        judge=role(cfg.judge_model),
    )
