"""Completion backends: a chat-completions HTTP client and a deterministic
replay backend for offline runs and tests.

Temperature defaults to 0 because downstream correctness is scored as a
binary indicator; sampling noise only hurts. Errors are classified as
retryable (rate limits, 5xx, network) or terminal (auth, bad request,
exhausted replay scripts), and ``with_retries`` retries only the former on
a deterministic backoff schedule.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import requests

API_KEY_ENV = "LORECAST_API_KEY"


@dataclass(frozen=True)
class LlmRequest:
    prompt_text: str
    model_id: str = ""
    temperature: float = 0.0
    max_output_tokens: int = 4096
    request_tag: str = ""

    def __post_init__(self) -> None:
        if not self.prompt_text:
            raise ValueError("prompt_text must be non-empty")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class LlmResponse:
    text: str
    latency_ms: int
    backend_id: str
    truncated: bool = False

    def __post_init__(self) -> None:
        if not self.backend_id:
            raise ValueError("backend_id must be non-empty")


class LlmError(Exception):
    pass


class RetryableLlmError(LlmError):
    """Transient failure: rate limit, server error, or network trouble."""


class TerminalLlmError(LlmError):
    """Permanent failure: retrying the same request cannot succeed."""


class ReplayExhaustedError(TerminalLlmError):
    """The replay script has fewer responses than the session requested."""


@dataclass(frozen=True)
class ReplayScript:
    """Canned responses addressed by request ordinal (0, 1, ...)."""

    responses: tuple[str, ...]

    @classmethod
    def from_file(cls, path: str) -> "ReplayScript":
        with open(path) as fh:
            text = fh.read()
        stripped = text.lstrip()
        if stripped.startswith("["):
            data = json.loads(text)
            if not isinstance(data, list) or not all(
                    isinstance(x, str) for x in data):
                raise ValueError(f"{path}: expected a JSON array of strings")
            return cls(responses=tuple(data))
        responses = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            item = json.loads(line)
            if isinstance(item, str):
                responses.append(item)
            elif isinstance(item, dict) and "text" in item:
                responses.append(item["text"])
            else:
                raise ValueError(
                    f"{path}:{lineno}: JSONL records must be strings or "
                    f"objects with a 'text' field")
        return cls(responses=tuple(responses))


class ReplayBackend:
    """Returns scripted responses in order; exhaustion is a scripting error."""

    backend_id = "replay"

    def __init__(self, script: ReplayScript | list[str]):
        if isinstance(script, list):
            script = ReplayScript(responses=tuple(script))
        self.script = script
        self.cursor = 0
        self.transcript: list[tuple[str, str]] = []

    def complete(self, request: LlmRequest) -> LlmResponse:
        if self.cursor >= len(self.script.responses):
            raise ReplayExhaustedError(
                f"replay script exhausted after "
                f"{len(self.script.responses)} responses")
        text = self.script.responses[self.cursor]
        self.cursor += 1
        self.transcript.append((request.prompt_text, text))
        return LlmResponse(text=text, latency_ms=0,
                           backend_id=self.backend_id)


class HttpBackend:
    """One chat-completions POST per request against a configurable endpoint.

    The prompt is transmitted unmodified as a single user message. The API
    key comes from the LORECAST_API_KEY environment variable unless given
    explicitly.
    """

    def __init__(self, endpoint_url: str, model_id: str,
                 timeout_s: float = 120.0, api_key: str | None = None,
                 session: requests.Session | None = None):
        self.endpoint_url = endpoint_url
        self.model_id = model_id
        self.timeout_s = timeout_s
        self.api_key = api_key if api_key is not None else os.environ.get(
            API_KEY_ENV, "")
        self.backend_id = f"http:{model_id}"
        self._session = session or requests.Session()

    def complete(self, request: LlmRequest) -> LlmResponse:
        payload = {
            "model": request.model_id or self.model_id,
            "messages": [{"role": "user", "content": request.prompt_text}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        started = time.monotonic()
        try:
            resp = self._session.post(self.endpoint_url, json=payload,
                                      headers=headers,
                                      timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise RetryableLlmError(f"network failure: {exc}") from exc
        latency_ms = int((time.monotonic() - started) * 1000)

        if resp.status_code == 429 or resp.status_code >= 500:
            raise RetryableLlmError(
                f"HTTP {resp.status_code} from {self.endpoint_url}")
        if resp.status_code >= 400:
            raise TerminalLlmError(
                f"HTTP {resp.status_code} from {self.endpoint_url}: "
                f"{resp.text[:200]}")
        try:
            doc = resp.json()
            choice = doc["choices"][0]
            text = choice["message"]["content"]
            truncated = choice.get("finish_reason") == "length"
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TerminalLlmError(
                f"malformed completion response: {exc}") from exc
        return LlmResponse(text=text, latency_ms=latency_ms,
                           backend_id=self.backend_id, truncated=truncated)


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_s: float = 0.5
    backoff_factor: float = 2.0

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.backoff_s < 0 or self.backoff_factor < 1:
            raise ValueError("invalid backoff parameters")

    def delays(self) -> list[float]:
        """Deterministic sleep schedule between attempts."""
        return [self.backoff_s * self.backoff_factor ** i
                for i in range(self.max_attempts - 1)]


def with_retries(backend, request: LlmRequest, policy: RetryPolicy,
                 sleep=time.sleep) -> LlmResponse:
    """Retry retryable failures up to policy.max_attempts total attempts.

    Terminal errors pass through immediately; on exhaustion the last
    retryable error is re-raised annotated with the attempt count.
    """
    delays = policy.delays()
    last: RetryableLlmError | None = None
    for attempt in range(policy.max_attempts):
        try:
            return backend.complete(request)
        except RetryableLlmError as exc:
            last = exc
            if attempt < len(delays):
                sleep(delays[attempt])
    raise RetryableLlmError(
        f"giving up after {policy.max_attempts} attempts: {last}") from last


class RetryingBackend:
    """Backend wrapper applying a retry policy to every completion."""

    def __init__(self, backend, policy: RetryPolicy, sleep=time.sleep):
        self.inner = backend
        self.policy = policy
        self.sleep = sleep
        self.backend_id = backend.backend_id

    def complete(self, request: LlmRequest) -> LlmResponse:
        return with_retries(self.inner, request, self.policy, self.sleep)
