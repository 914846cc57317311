"""HTTP client for chat-completion endpoints, plus record/replay storage.

The client retries transient failures with exponential backoff, keeps every
attempt's request/response pair verbatim, and paces itself so no sliding
60-second window ever sees more requests than the configured budget. The
replay store maps content-addressed keys to recorded completions so any run
can be re-executed offline, byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import httpx

BACKOFF_BASE_SECONDS = 1.0
BACKOFF_FACTOR = 2.0
BACKOFF_JITTER_SHARE = 0.1  # additive, up to this share of the base delay


class AuthError(RuntimeError):
    """Credentials missing or rejected; the run must stop with a clear message."""


class ExhaustedError(RuntimeError):
    """All attempts failed; carries the full exchange trail for the log."""

    def __init__(self, message: str, exchanges: list["CompletionExchange"]):
        super().__init__(message)
        self.exchanges = exchanges


class MissingRecordingError(KeyError):
    """Replay store has no response for the requested key."""


@dataclass(frozen=True)
class ModelEndpoint:
    """Where and how to call a chat-completion API.

    ``api_key_env`` names the environment variable holding the secret; the
    secret itself is read at call time and never serialized anywhere.
    """

    base_url: str
    model_name: str
    api_key_env: str = "BLOCKTOWN_API_KEY"
    temperature: float = 0.7
    max_tokens: int = 1024
    timeout: float = 60.0
    max_retries: int = 3
    requests_per_minute: int = 60

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "base_url": self.base_url,
            "model_name": self.model_name,
            "api_key_env": self.api_key_env,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
            "requests_per_minute": self.requests_per_minute,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelEndpoint":
        return cls(**data)


@dataclass
class CompletionExchange:
    """One attempt's wire traffic, stored verbatim for replay and audit."""

    request_body: str
    response_body: str
    latency: float
    attempt: int
    http_status: int
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "request_body": self.request_body,
            "response_body": self.response_body,
            "latency": self.latency,
            "attempt": self.attempt,
            "http_status": self.http_status,
            "error": self.error,
        }


class RateLimiter:
    """Admits at most ``limit`` calls in any sliding 60-second window.

    Safe for concurrent acquires: the bookkeeping is checked and updated
    under a lock; only the sleep happens outside it.
    """

    def __init__(
        self,
        limit: int,
        time_fn: Callable[[], float] = time.monotonic,
        sleep_fn: Callable[[float], None] = time.sleep,
    ):
        self.limit = limit
        self._time = time_fn
        self._sleep = sleep_fn
        self._admitted: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        if self.limit <= 0:
            return
        while True:
            with self._lock:
                now = self._time()
                while self._admitted and self._admitted[0] <= now - 60.0:
                    self._admitted.popleft()
                if len(self._admitted) < self.limit:
                    self._admitted.append(now)
                    return
                wait = self._admitted[0] + 60.0 - now
            self._sleep(wait)


def canonical_request_body(endpoint: ModelEndpoint, prompt: str) -> str:
    """Request JSON with sorted keys so replay hashing stays stable."""
    body = {
        "max_tokens": endpoint.max_tokens,
        "messages": [{"content": prompt, "role": "user"}],
        "model": endpoint.model_name,
        "temperature": endpoint.temperature,
    }
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class GatewayClient:
    """Synchronous chat-completion client; safe to share across threads for
    independent requests (each call owns its own state)."""

    def __init__(
        self,
        endpoint: ModelEndpoint,
        transport: httpx.BaseTransport | None = None,
        time_fn: Callable[[], float] = time.monotonic,
        sleep_fn: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self.endpoint = endpoint
        self._client = httpx.Client(transport=transport, timeout=endpoint.timeout)
        self._limiter = RateLimiter(endpoint.requests_per_minute, time_fn, sleep_fn)
        self._sleep = sleep_fn
        self._rng = rng if rng is not None else random.Random()

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "GatewayClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def _api_key(self) -> str:
        key = os.environ.get(self.endpoint.api_key_env)
        if not key:
            raise AuthError(
                f"environment variable {self.endpoint.api_key_env} is not set"
            )
        return key

    def _backoff(self, attempt: int) -> float:
        base = BACKOFF_BASE_SECONDS * BACKOFF_FACTOR ** (attempt - 1)
        return base + self._rng.uniform(0.0, BACKOFF_JITTER_SHARE * base)

    def complete(self, prompt: str) -> tuple[str, list[CompletionExchange]]:
        """Return the assistant text for ``prompt`` plus the attempt trail.

        Retries timeouts, 429s and 5xx responses with exponential backoff up
        to ``max_retries`` extra attempts. 401/403 raise AuthError at once;
        any other status is not retried.
        """
        request_body = canonical_request_body(self.endpoint, prompt)
        url = self.endpoint.base_url.rstrip("/") + "/chat/completions"
        headers = {
            "Authorization": f"Bearer {self._api_key()}",
            "Content-Type": "application/json",
        }
        exchanges: list[CompletionExchange] = []
        total_attempts = self.endpoint.max_retries + 1
        for attempt in range(1, total_attempts + 1):
            self._limiter.acquire()
            started = time.monotonic()
            try:
                response = self._client.post(
                    url, content=request_body.encode("utf-8"), headers=headers
                )
            except httpx.HTTPError as exc:
                exchanges.append(
                    CompletionExchange(
                        request_body=request_body,
                        response_body="",
                        latency=time.monotonic() - started,
                        attempt=attempt,
                        http_status=0,
                        error=f"transport error: {exc}",
                    )
                )
                if attempt < total_attempts:
                    self._sleep(self._backoff(attempt))
                continue
            latency = time.monotonic() - started
            exchange = CompletionExchange(
                request_body=request_body,
                response_body=response.text,
                latency=latency,
                attempt=attempt,
                http_status=response.status_code,
            )
            exchanges.append(exchange)
            if response.status_code in (401, 403):
                raise AuthError(
                    f"endpoint rejected credentials (HTTP {response.status_code})"
                )
            if response.status_code == 200:
                try:
                    payload = json.loads(response.text)
                    content = payload["choices"][0]["message"]["content"]
                except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
                    exchange.error = f"malformed completion body: {exc}"
                else:
                    if isinstance(content, str):
                        return content, exchanges
                    exchange.error = "completion content is not a string"
            elif response.status_code == 429 or response.status_code >= 500:
                exchange.error = f"retryable status {response.status_code}"
            else:
                exchange.error = f"unexpected status {response.status_code}"
                raise ExhaustedError(
                    f"endpoint returned non-retryable HTTP {response.status_code}",
                    exchanges,
                )
            if attempt < total_attempts:
                self._sleep(self._backoff(attempt))
        raise ExhaustedError(
            f"all {total_attempts} attempts failed against {url}", exchanges
        )


def exchange_key(scope: str, ordinal: int, prompt: str) -> str:
    """Content address for one completion: who asked, which attempt, what text."""
    digest = hashlib.sha256()
    digest.update(scope.encode("utf-8"))
    digest.update(b"\x1f")
    digest.update(str(ordinal).encode("utf-8"))
    digest.update(b"\x1f")
    digest.update(prompt.encode("utf-8"))
    return digest.hexdigest()


class ReplayStore:
    """Content-addressed JSONL store of recorded completions.

    Live runs append every completion here; replay runs resolve the same keys
    instead of touching the network, which makes re-runs fully deterministic.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._responses: dict[str, str] = {}

    @classmethod
    def load(cls, path: str | Path) -> "ReplayStore":
        store = cls(path)
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                store._responses[entry["key"]] = entry["response"]
        return store

    def __len__(self) -> int:
        return len(self._responses)

    def put(self, key: str, response: str) -> None:
        self._responses[key] = response
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(
                    json.dumps(
                        {"key": key, "response": response}, ensure_ascii=False
                    )
                    + "\n"
                )

    def get(self, key: str) -> str:
        try:
            return self._responses[key]
        except KeyError:
            raise MissingRecordingError(
                f"no recorded completion for key {key}"
            ) from None


def replay_complete(store: ReplayStore, key: str) -> str:
    """Recorded response for ``key``, byte for byte."""
    return store.get(key)
