"""Language-model clients used by the generation loop.

Two interchangeable clients live here: :class:`HTTPClient` speaks a
chat-completions style JSON API over HTTP, and :class:`MockClient` replays a
scripted list of replies for offline runs and tests.  Both share batching,
rate limiting, and transcript logging through :class:`BaseClient`.

Every call, successful or not, is appended to the JSONL transcript (when one
is configured) and flushed to disk before the caller sees the result, so a
crashed run never loses paid responses.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from datetime import datetime, timezone
from pathlib import Path

import requests

__all__ = [
    "BaseClient",
    "EmptyBatch",
    "GenerationFailure",
    "HTTPClient",
    "LLMParams",
    "LLMUnavailable",
    "MockClient",
    "TranscriptWriter",
]


class LLMUnavailable(RuntimeError):
    """The model could not produce a reply after all retries."""


class EmptyBatch(ValueError):
    """generate_batch was handed no prompts at all."""


@dataclass(frozen=True)
class GenerationFailure:
    """Placeholder slot in a batch whose call failed; keeps ordering intact."""

    reason: str


@dataclass(frozen=True)
class LLMParams:
    """Sampling and transport settings for a model call."""

    temperature: float = 0.5
    top_k: int = 60
    top_p: float | None = None
    model: str = "default"
    max_tokens: int | None = None
    timeout: float = 120.0
    max_retries: int = 3

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be nonnegative")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")
        if self.top_p is not None and not 0 < self.top_p <= 1:
            raise ValueError("top_p must lie in (0, 1]")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


class TranscriptWriter:
    """Append-only JSONL log of every model call.

    Records are flushed and fsynced as they are written; a reader can tail
    the file while a run is in flight.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def append(self, record: dict) -> None:
        line = json.dumps(record, separators=(",", ":"))
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())


def _prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class BaseClient:
    """Shared batching, pacing, and transcript plumbing for clients."""

    def __init__(
        self,
        params: LLMParams | None = None,
        transcript: TranscriptWriter | None = None,
        min_interval: float = 0.0,
        parallelism: int = 1,
    ):
        if parallelism < 1:
            raise ValueError("parallelism must be at least 1")
        self.params = params or LLMParams()
        self.transcript = transcript
        self.min_interval = float(min_interval)
        self.parallelism = int(parallelism)
        self.calls = 0
        self._pace_lock = threading.Lock()
        self._count_lock = threading.Lock()
        self._last_start = 0.0

    def _pace(self) -> None:
        # Serializes request starts so bursts respect min_interval.
        if self.min_interval <= 0:
            return
        with self._pace_lock:
            wait = self._last_start + self.min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last_start = time.monotonic()

    def _record(self, prompt: str, params: LLMParams, response: str | None,
                error: str | None, latency: float) -> None:
        with self._count_lock:
            self.calls += 1
        if self.transcript is None:
            return
        self.transcript.append(
            {
                "timestamp": datetime.now(timezone.utc).isoformat(),
                "prompt_hash": _prompt_hash(prompt),
                "params": params.to_dict(),
                "response": response,
                "error": error,
                "latency": round(latency, 6),
            }
        )

    def _generate_once(self, prompt: str, params: LLMParams) -> str:
        raise NotImplementedError

    def generate(self, prompt: str, params: LLMParams | None = None) -> str:
        """One prompt in, one reply out; raises LLMUnavailable on failure."""
        params = params or self.params
        self._pace()
        start = time.monotonic()
        try:
            text = self._generate_once(prompt, params)
        except LLMUnavailable as exc:
            self._record(prompt, params, None, str(exc), time.monotonic() - start)
            raise
        self._record(prompt, params, text, None, time.monotonic() - start)
        return text

    def generate_batch(
        self, prompts: list[str], params: LLMParams | None = None
    ) -> list[str | GenerationFailure]:
        """Resolve several prompts, replies in prompt order.

        A failed slot becomes a :class:`GenerationFailure` rather than
        poisoning the whole batch.
        """
        prompts = list(prompts)
        if not prompts:
            raise EmptyBatch("generate_batch needs at least one prompt")

        def one(prompt: str) -> str | GenerationFailure:
            try:
                return self.generate(prompt, params)
            except LLMUnavailable as exc:
                return GenerationFailure(str(exc))

        if self.parallelism == 1 or len(prompts) == 1:
            return [one(p) for p in prompts]
        with ThreadPoolExecutor(max_workers=self.parallelism) as pool:
            return list(pool.map(one, prompts))


class HTTPClient(BaseClient):
    """Talks to a chat-completions style endpoint.

    The request body carries ``model``, a single user message, and the
    sampling settings; the reply may use any of the common response shapes
    (``choices[].message.content``, ``choices[].text``, ``content[].text``,
    or a bare ``text`` field).  Credentials come from the environment, never
    from configuration files.
    """

    RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})

    def __init__(
        self,
        endpoint: str,
        params: LLMParams | None = None,
        api_key_env: str = "EVOBO_API_KEY",
        transcript: TranscriptWriter | None = None,
        min_interval: float = 0.0,
        parallelism: int = 1,
        backoff_base: float = 0.5,
        session: requests.Session | None = None,
    ):
        super().__init__(params, transcript, min_interval, parallelism)
        if not endpoint:
            raise ValueError("endpoint must be a nonempty URL")
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.backoff_base = backoff_base
        self._session = session or requests.Session()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _payload(self, prompt: str, params: LLMParams) -> dict:
        payload = {
            "model": params.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "top_k": params.top_k,
        }
        if params.top_p is not None:
            payload["top_p"] = params.top_p
        if params.max_tokens is not None:
            payload["max_tokens"] = params.max_tokens
        return payload

    def _generate_once(self, prompt: str, params: LLMParams) -> str:
        attempts = params.max_retries + 1
        last_error = "no attempt made"
        for attempt in range(attempts):
            if attempt:
                time.sleep(min(self.backoff_base * 2 ** (attempt - 1), 8.0))
            try:
                resp = self._session.post(
                    self.endpoint,
                    json=self._payload(prompt, params),
                    headers=self._headers(),
                    timeout=params.timeout,
                )
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_error = f"transport error: {exc}"
                continue
            if resp.status_code in self.RETRY_STATUSES:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise LLMUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return _extract_text(resp.json())
            except ValueError as exc:
                raise LLMUnavailable(str(exc)) from exc
        raise LLMUnavailable(f"gave up after {attempts} attempts ({last_error})")


def _extract_text(data: object) -> str:
    """Pull the reply text out of any of the common response layouts."""
    if isinstance(data, dict):
        choices = data.get("choices")
        if isinstance(choices, list) and choices:
            first = choices[0]
            if isinstance(first, dict):
                message = first.get("message")
                if isinstance(message, dict) and isinstance(message.get("content"), str):
                    return message["content"]
                if isinstance(first.get("text"), str):
                    return first["text"]
        content = data.get("content")
        if isinstance(content, list) and content:
            first = content[0]
            if isinstance(first, dict) and isinstance(first.get("text"), str):
                return first["text"]
        if isinstance(data.get("text"), str):
            return data["text"]
    raise ValueError("unrecognized response shape")


class MockClient(BaseClient):
    """Replays a fixed list of replies, in order.

    An entry may be a string (returned as-is) or an Exception instance
    (raised, wrapped in LLMUnavailable when needed).  Running past the end
    of the script raises LLMUnavailable.  ``position`` can be saved and
    restored so a resumed run continues mid-script.
    """

    def __init__(
        self,
        responses: list,
        params: LLMParams | None = None,
        transcript: TranscriptWriter | None = None,
        min_interval: float = 0.0,
        parallelism: int = 1,
    ):
        super().__init__(params, transcript, min_interval, parallelism)
        self.responses = list(responses)
        self._pos_lock = threading.Lock()
        self.position = 0

    def seek(self, position: int) -> None:
        if not 0 <= position <= len(self.responses):
            raise ValueError("position out of range")
        self.position = position

    def _generate_once(self, prompt: str, params: LLMParams) -> str:
        with self._pos_lock:
            if self.position >= len(self.responses):
                raise LLMUnavailable("mock script exhausted")
            entry = self.responses[self.position]
            self.position += 1
        if isinstance(entry, LLMUnavailable):
            raise entry
        if isinstance(entry, Exception):
            raise LLMUnavailable(str(entry)) from entry
        return str(entry)
