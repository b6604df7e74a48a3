"""Access to chat-completion text generation endpoints.

Two backends implement the same one-call contract:

- ``HttpBackend`` speaks the de-facto chat-completion JSON protocol
  (single user message carrying the rendered prompt);
- ``ScriptedBackend`` replays canned responses keyed by the SHA-256 of
  the prompt, standing in for a live model in tests and dry runs.

``GenerationClient`` wraps a backend with retry-with-backoff on
transient transport failures and a semaphore capping in-flight requests.
Request fingerprints depend only on the prompt text, never on timing or
concurrency order, so scripted runs are byte-deterministic.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

from .errors import EndpointRejected, InputError, TransportError

logger = logging.getLogger(__name__)

ENV_BASE_URL = "VERICHAIN_ENDPOINT"
ENV_API_KEY = "VERICHAIN_API_KEY"
ENV_MODEL = "VERICHAIN_MODEL"


def prompt_fingerprint(prompt: str) -> str:
    """SHA-256 hex digest of the prompt text; the scripted-backend key."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class FinishReason(enum.Enum):
    STOP = "stop"
    LENGTH = "length"
    ERROR = "error"


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    temperature: float = 0.01
    max_tokens: int = 1024
    model_name: str = ""

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass(frozen=True)
class GenerationResult:
    text: str
    finish_reason: FinishReason
    usage: TokenUsage = TokenUsage()
    latency: float = 0.0

    @property
    def truncated(self) -> bool:
        return self.finish_reason is FinishReason.LENGTH


class Backend(Protocol):
    def complete(self, request: GenerationRequest) -> GenerationResult: ...


class Fallback(enum.Enum):
    ERROR = "error"
    ECHO = "echo"


@dataclass
class ScriptedBackend:
    """Deterministic prompt -> response mapping keyed by prompt SHA-256."""

    responses: dict[str, str] = field(default_factory=dict)
    fallback: Fallback = Fallback.ERROR

    @classmethod
    def from_file(cls, path: str | Path, fallback: Fallback = Fallback.ERROR) -> "ScriptedBackend":
        """Load a fixture file: a JSON object mapping prompt SHA-256 to response text."""
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in raw.items()
        ):
            raise InputError(f"scripted fixture {path} must map prompt hashes to text")
        return cls(responses=raw, fallback=fallback)

    def add(self, prompt: str, response: str) -> None:
        self.responses[prompt_fingerprint(prompt)] = response

    def complete(self, request: GenerationRequest) -> GenerationResult:
        key = prompt_fingerprint(request.prompt)
        text = self.responses.get(key)
        if text is None:
            if self.fallback is Fallback.ECHO:
                text = request.prompt
            else:
                raise TransportError(f"no scripted response for prompt {key[:12]}")
        return GenerationResult(text=text, finish_reason=FinishReason.STOP)


class HttpBackend:
    """Chat-completion HTTP backend.

    4xx responses raise EndpointRejected and are never retried; network
    failures and 5xx responses raise TransportError, which the client
    treats as transient.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        model_name: str = "",
        timeout: float = 120.0,
        client: httpx.Client | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model_name = model_name
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = client or httpx.Client(headers=headers, timeout=timeout)

    @classmethod
    def from_env(cls, env: dict[str, str]) -> "HttpBackend":
        base_url = env.get(ENV_BASE_URL)
        if not base_url:
            raise InputError(f"{ENV_BASE_URL} is not set")
        return cls(
            base_url=base_url,
            api_key=env.get(ENV_API_KEY),
            model_name=env.get(ENV_MODEL, ""),
        )

    def complete(self, request: GenerationRequest) -> GenerationResult:
        payload = {
            "model": request.model_name or self.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        started = time.monotonic()
        try:
            response = self._client.post(f"{self.base_url}/chat/completions", json=payload)
        except httpx.HTTPError as exc:
            raise TransportError(f"request failed: {exc}") from exc
        latency = time.monotonic() - started

        if 400 <= response.status_code < 500:
            raise EndpointRejected(response.status_code, response.text[:500])
        if response.status_code != 200:
            raise TransportError(f"endpoint returned {response.status_code}")

        try:
            body = response.json()
            choice = body["choices"][0]
            text = choice["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed completion response: {exc}") from exc

        finish = choice.get("finish_reason", "stop")
        try:
            finish_reason = FinishReason(finish)
        except ValueError:
            finish_reason = FinishReason.ERROR
        usage = body.get("usage") or {}
        return GenerationResult(
            text=text,
            finish_reason=finish_reason,
            usage=TokenUsage(
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
            ),
            latency=latency,
        )


class GenerationClient:
    """Retry and concurrency wrapper around a backend.

    Shareable across threads; ``max_in_flight`` bounds concurrent
    backend calls.
    """

    def __init__(
        self,
        backend: Backend,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        max_in_flight: int = 8,
    ):
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.backend = backend
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._limiter = threading.Semaphore(max_in_flight)

    def generate(self, request: GenerationRequest) -> GenerationResult:
        last_error: TransportError | None = None
        with self._limiter:
            for attempt in range(1, self.max_attempts + 1):
                try:
                    return self.backend.complete(request)
                except TransportError as exc:
                    last_error = exc
                    if attempt < self.max_attempts:
                        delay = self.backoff_base * (2 ** (attempt - 1))
                        logger.warning(
                            "transport failure (attempt %d/%d), retrying in %.2fs: %s",
                            attempt,
                            self.max_attempts,
                            delay,
                            exc,
                        )
                        if delay > 0:
                            time.sleep(delay)
        assert last_error is not None
        raise last_error
