"""Uniform gateway to generative and embedding backends.

All model traffic flows through one Gateway object that owns caching,
content-addressed transcripts, retries, and call counters. Three backend
kinds exist:

* ``scripted`` — a deterministic in-process script (tests, demos, and
  transcript recording);
* ``replay`` — serves previously recorded transcripts only, guaranteeing
  byte-identical pipeline runs with zero network traffic;
* ``live`` — an HTTP JSON endpoint, retried with exponential backoff.

Every successful completion and embedding is persisted to the transcript
store (write-temp-then-rename), so a scripted run doubles as a recording
session for later replay.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import urllib.request
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .prompts import TEMPLATES

__all__ = [
    "BackendExhausted",
    "EmbeddingBackendFailure",
    "Gateway",
    "GatewayConfig",
    "GatewayError",
    "LiveHTTPBackend",
    "ModelResponse",
    "PromptSpec",
    "ReplayBackend",
    "ReplayMiss",
    "Sampling",
    "ScriptedBackend",
    "TransientBackendError",
    "build_gateway",
    "cache_key",
    "load_config",
]


class GatewayError(Exception):
    """Base class; aborts the current sample, never the whole run."""


class BackendExhausted(GatewayError):
    """Retry budget used up against the live backend."""


class ReplayMiss(GatewayError):
    """No stored transcript for the requested cache key."""


class EmbeddingBackendFailure(GatewayError):
    """Embedding call failed after retries (or produced an unusable vector)."""


class TransientBackendError(Exception):
    """Internal marker for a retryable backend failure."""


@dataclass(frozen=True)
class Sampling:
    temperature: float = 0.7  # default generation temperature
    max_tokens: int = 1024
    n: int = 1

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")


@dataclass(frozen=True)
class PromptSpec:
    """One templated model call: template id, filled slots, attachments."""

    template_id: str
    slots: Mapping[str, str]
    attachments: tuple[tuple[str, str], ...] = ()  # (doc_id, image uri)
    sampling: Sampling = Sampling()

    def __post_init__(self) -> None:
        template = TEMPLATES.get(self.template_id)
        if template is None:
            raise ValueError(f"unknown template {self.template_id!r}")
        missing = [s for s in sorted(template.required_slots) if not self.slots.get(s)]
        if missing:
            raise ValueError(f"template {self.template_id!r} missing slots: {missing}")

    def render(self) -> str:
        return TEMPLATES[self.template_id].render(self.slots)


@dataclass(frozen=True)
class ModelResponse:
    texts: tuple[str, ...]
    backend_id: str
    latency_ms: float
    cache_hit: bool
    transcript_key: str


def cache_key(spec: PromptSpec) -> str:
    """Stable content hash of a spec, insensitive to slot insertion order."""
    payload = {
        "template_id": spec.template_id,
        "slots": dict(sorted(spec.slots.items())),
        "attachments": [list(a) for a in spec.attachments],
        "sampling": {
            "temperature": spec.sampling.temperature,
            "max_tokens": spec.sampling.max_tokens,
            "n": spec.sampling.n,
        },
    }
    digest = hashlib.sha256(
        json.dumps(payload, sort_keys=True, ensure_ascii=True).encode("utf-8")
    ).hexdigest()
    return f"{spec.template_id}.{digest[:32]}"


def _embed_key(text: str) -> str:
    # Content-only, like cache_key: a transcript store is per backend setup,
    # and replay must resolve the recording backend's entries.
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return f"embed.{digest[:32]}"


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------


ScriptValue = str | Sequence[str] | Callable[[PromptSpec], "str | Sequence[str]"]


class ScriptedBackend:
    """Deterministic backend driven by a per-template script.

    Script values may be a plain string (returned for every call, replicated
    to the requested n), a list used as a consume-once queue (the last entry
    repeats once exhausted; each call consumes n entries), or a callable
    receiving the full spec.
    """

    is_network = False

    def __init__(
        self,
        script: Mapping[str, ScriptValue] | None = None,
        embedder: Callable[[str], Sequence[float]] | Mapping[str, Sequence[float]] | None = None,
        dim: int = 8,
        backend_id: str = "scripted",
    ) -> None:
        self.id = backend_id
        self.dim = dim
        self._script = dict(script or {})
        self._queues: dict[str, list[str]] = {}
        self._embedder = embedder

    def complete(self, spec: PromptSpec) -> list[str]:
        value = self._script.get(spec.template_id)
        if value is None:
            raise TransientBackendError(f"no script for template {spec.template_id!r}")
        n = spec.sampling.n
        if callable(value):
            try:
                out = value(spec)
            except LookupError as exc:
                raise TransientBackendError(f"script gap: {exc}") from exc
            texts = [out] * n if isinstance(out, str) else list(out)
        elif isinstance(value, str):
            texts = [value] * n
        else:
            queue = self._queues.setdefault(spec.template_id, list(value))
            if not queue:
                raise TransientBackendError(f"script queue empty for {spec.template_id!r}")
            texts = []
            for _ in range(n):
                texts.append(queue.pop(0) if len(queue) > 1 else queue[0])
        if len(texts) < n:
            texts = texts + [texts[-1]] * (n - len(texts))
        return texts[:n]

    def embed(self, text: str) -> np.ndarray:
        if isinstance(self._embedder, Mapping):
            if text not in self._embedder:
                return self._hash_vector(text)
            return np.asarray(self._embedder[text], dtype=np.float64)
        if callable(self._embedder):
            return np.asarray(self._embedder(text), dtype=np.float64)
        return self._hash_vector(text)

    def _hash_vector(self, text: str) -> np.ndarray:
        # Deterministic pseudo-embedding: bytes of repeated sha256 as floats.
        raw = b""
        counter = 0
        while len(raw) < self.dim:
            raw += hashlib.sha256(f"{counter}\x1f{text}".encode("utf-8")).digest()
            counter += 1
        return np.frombuffer(raw[: self.dim], dtype=np.uint8).astype(np.float64) - 127.5


class ReplayBackend:
    """Backend that never generates: every miss is an error."""

    is_network = False

    def __init__(self, backend_id: str = "replay") -> None:
        self.id = backend_id
        self.dim = 0  # replayed vectors carry their own dimension

    def complete(self, spec: PromptSpec) -> list[str]:
        raise ReplayMiss(f"no transcript recorded for {cache_key(spec)}")

    def embed(self, text: str) -> np.ndarray:
        raise ReplayMiss(f"no embedding recorded for {text[:40]!r}")


class LiveHTTPBackend:
    """Minimal JSON-over-HTTP backend (never exercised by the test suite)."""

    is_network = True

    def __init__(
        self,
        endpoint: str,
        model: str,
        dim: int = 256,
        api_key: str | None = None,
        timeout: float = 60.0,
        backend_id: str | None = None,
    ) -> None:
        self.id = backend_id or f"live:{model}"
        self.endpoint = endpoint
        self.model = model
        self.dim = dim
        self.api_key = api_key
        self.timeout = timeout

    def _post(self, path: str, payload: dict) -> dict:
        body = json.dumps(payload).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint.rstrip("/") + path,
            data=body,
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        if self.api_key:
            req.add_header("Authorization", f"Bearer {self.api_key}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except Exception as exc:  # network and HTTP errors are retryable
            raise TransientBackendError(str(exc)) from exc

    def complete(self, spec: PromptSpec) -> list[str]:
        payload = {
            "model": self.model,
            "prompt": spec.render(),
            "attachments": [list(a) for a in spec.attachments],
            "n": spec.sampling.n,
            "temperature": spec.sampling.temperature,
            "max_tokens": spec.sampling.max_tokens,
        }
        data = self._post("/complete", payload)
        texts = data.get("texts")
        if not isinstance(texts, list) or len(texts) != spec.sampling.n:
            raise TransientBackendError("malformed completion response")
        return [str(t) for t in texts]

    def embed(self, text: str) -> np.ndarray:
        data = self._post("/embed", {"model": self.model, "text": text})
        vector = data.get("vector")
        if not isinstance(vector, list):
            raise TransientBackendError("malformed embedding response")
        return np.asarray(vector, dtype=np.float64)


# ---------------------------------------------------------------------------
# Gateway
# ---------------------------------------------------------------------------


class Gateway:
    """Caching, retrying, recording front door for one backend."""

    def __init__(
        self,
        backend,
        store_dir: str | Path | None = None,
        retry_budget: int = 2,
        max_in_flight: int = 4,
        backoff_base: float = 0.05,
    ) -> None:
        self.backend = backend
        self.store_dir = Path(store_dir) if store_dir else None
        if self.store_dir:
            self.store_dir.mkdir(parents=True, exist_ok=True)
        self.retry_budget = retry_budget
        self.backoff_base = backoff_base
        self.counters: Counter[str] = Counter()
        self.request_log: list[tuple[str, str]] = []  # (template_id, key)
        self._memory: dict[str, tuple[str, ...]] = {}
        self._embed_memory: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        self._in_flight = threading.Semaphore(max_in_flight)

    # -- completions --------------------------------------------------------

    def complete(self, spec: PromptSpec) -> ModelResponse:
        key = cache_key(spec)
        started = time.perf_counter()
        with self._lock:
            self.request_log.append((spec.template_id, key))
            cached = self._memory.get(key)
        if cached is None:
            stored = self._load_transcript(key)
            if stored is not None:
                cached = stored
                with self._lock:
                    self._memory[key] = cached
        if cached is not None:
            self.counters["complete.cache_hit"] += 1
            return ModelResponse(
                texts=cached,
                backend_id=self.backend.id,
                latency_ms=(time.perf_counter() - started) * 1000,
                cache_hit=True,
                transcript_key=key,
            )

        texts = tuple(self._call_with_retry(lambda: self.backend.complete(spec)))
        if len(texts) != spec.sampling.n:
            raise BackendExhausted(
                f"backend returned {len(texts)} texts, wanted {spec.sampling.n}"
            )
        self.counters["complete.backend"] += 1
        with self._lock:
            self._memory[key] = texts
        self._persist_transcript(key, spec, texts)
        return ModelResponse(
            texts=texts,
            backend_id=self.backend.id,
            latency_ms=(time.perf_counter() - started) * 1000,
            cache_hit=False,
            transcript_key=key,
        )

    # -- embeddings ----------------------------------------------------------

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed empty text")
        key = _embed_key(text)
        with self._lock:
            if key in self._embed_memory:
                self.counters["embed.cache_hit"] += 1
                return self._embed_memory[key]
        stored = self._load_embedding(key)
        if stored is not None:
            with self._lock:
                self._embed_memory[key] = stored
            self.counters["embed.cache_hit"] += 1
            return stored
        try:
            raw = self._call_with_retry(lambda: self.backend.embed(text))
        except BackendExhausted as exc:
            raise EmbeddingBackendFailure(str(exc)) from exc
        vector = np.asarray(raw, dtype=np.float64)
        norm = float(np.linalg.norm(vector))
        if not np.isfinite(norm) or norm == 0.0:
            raise EmbeddingBackendFailure("backend produced a non-normalizable vector")
        vector = vector / norm
        self.counters["embed.backend"] += 1
        with self._lock:
            self._embed_memory[key] = vector
        self._persist_embedding(key, text, vector)
        return vector

    # -- captions ------------------------------------------------------------

    def caption_image(self, uri: str, question: str) -> str:
        """Question-conditioned caption, cached per (uri, question)."""
        self.counters["caption_requests"] += 1
        spec = PromptSpec(
            template_id="caption",
            slots={"image_uri": uri, "question": question},
        )
        return self.complete(spec).texts[0]

    # -- internals -----------------------------------------------------------

    def _call_with_retry(self, call):
        if self.backend.is_network:
            self.counters["network_requests"] += 1
        attempts = 0
        with self._in_flight:
            while True:
                try:
                    return call()
                except ReplayMiss:
                    raise
                except TransientBackendError as exc:
                    attempts += 1
                    if attempts > self.retry_budget:
                        raise BackendExhausted(
                            f"gave up after {attempts} attempts: {exc}"
                        ) from exc
                    self.counters["retries"] += 1
                    time.sleep(self.backoff_base * (2 ** (attempts - 1)))
                    if self.backend.is_network:
                        self.counters["network_requests"] += 1

    def _transcript_path(self, key: str) -> Path | None:
        return self.store_dir / f"{key}.json" if self.store_dir else None

    def _load_transcript(self, key: str) -> tuple[str, ...] | None:
        path = self._transcript_path(key)
        if path is None or not path.exists():
            return None
        data = json.loads(path.read_text(encoding="utf-8"))
        return tuple(data["texts"])

    def _persist_transcript(self, key: str, spec: PromptSpec, texts: tuple[str, ...]) -> None:
        path = self._transcript_path(key)
        if path is None:
            return
        record = {
            "schema": "transcript/v1",
            "key": key,
            "template_id": spec.template_id,
            "backend_id": self.backend.id,
            "texts": list(texts),
        }
        _atomic_write(path, json.dumps(record, ensure_ascii=False, indent=None, sort_keys=True))

    def _load_embedding(self, key: str) -> np.ndarray | None:
        path = self._transcript_path(key)
        if path is None or not path.exists():
            return None
        data = json.loads(path.read_text(encoding="utf-8"))
        return np.asarray(data["vector"], dtype=np.float64)

    def _persist_embedding(self, key: str, text: str, vector: np.ndarray) -> None:
        path = self._transcript_path(key)
        if path is None:
            return
        record = {
            "schema": "embedding/v1",
            "key": key,
            "backend_id": self.backend.id,
            "text_sha": hashlib.sha256(text.encode("utf-8")).hexdigest()[:16],
            "vector": vector.tolist(),
        }
        _atomic_write(path, json.dumps(record, sort_keys=True))


def _atomic_write(path: Path, content: str) -> None:
    tmp = path.with_suffix(path.suffix + f".tmp{os.getpid()}")
    tmp.write_text(content, encoding="utf-8")
    tmp.replace(path)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class GatewayConfig:
    backend: str = "replay"  # replay | live | scripted
    endpoint: str = ""
    model: str = ""
    dim: int = 16
    retry_budget: int = 2
    max_in_flight: int = 4
    api_key_env: str = ""
    store_dir: str = ""


def load_config(path: str | Path) -> GatewayConfig:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    config = GatewayConfig()
    for name in vars(config):
        if name in data:
            setattr(config, name, data[name])
    return config


def build_gateway(config: GatewayConfig, script: Mapping[str, ScriptValue] | None = None) -> Gateway:
    """Construct the gateway described by a config object.

    The api key is read from the environment variable named in the config,
    never from the config file itself.
    """
    if config.backend == "live":
        key = os.environ.get(config.api_key_env) if config.api_key_env else None
        backend = LiveHTTPBackend(
            endpoint=config.endpoint, model=config.model, dim=config.dim, api_key=key
        )
    elif config.backend == "scripted":
        backend = ScriptedBackend(script=script, dim=config.dim)
    elif config.backend == "replay":
        backend = ReplayBackend()
    else:
        raise ValueError(f"unknown backend kind {config.backend!r}")
    return Gateway(
        backend,
        store_dir=config.store_dir or None,
        retry_budget=config.retry_budget,
        max_in_flight=config.max_in_flight,
    )
