"""Text-generation backends used for caption-to-code translation.

Two concrete transports: an HTTP JSON client for real services and an
in-process mock that replays a scripted transcript (used by all tests).
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass, field

from .errors import TransportError


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    system: str | None = None
    max_tokens: int = 4096


class TextBackend:
    """Interface: request = {prompt, optional system, max output length} -> text."""

    backend_id: str = "abstract"

    def complete(self, request: GenerationRequest) -> str:
        raise NotImplementedError

    @property
    def call_count(self) -> int:
        return getattr(self, "_calls", 0)

    def _count(self) -> None:
        self._calls = getattr(self, "_calls", 0) + 1


class RateLimiter:
    """Caps request rate across workers; acquire() blocks until a slot opens."""

    def __init__(self, max_per_second: float | None):
        self._interval = 1.0 / max_per_second if max_per_second else 0.0
        self._lock = threading.Lock()
        self._next_free = 0.0

    def acquire(self) -> None:
        if self._interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            wait = self._next_free - now
            self._next_free = max(now, self._next_free) + self._interval
        if wait > 0:
            time.sleep(wait)


@dataclass
class MockTextBackend(TextBackend):
    """Replays a scripted transcript and records every request it sees.

    Script entries may be response strings or exception instances (raised
    in order). A callable ``responder`` can be supplied instead of a script.
    """

    script: list = field(default_factory=list)
    responder: object = None
    backend_id: str = "mock"
    requests: list[GenerationRequest] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._cursor = 0
        self._lock = threading.Lock()

    def complete(self, request: GenerationRequest) -> str:
        with self._lock:
            self._count()
            self.requests.append(request)
            if self.responder is not None:
                return self.responder(request)
            if self._cursor >= len(self.script):
                raise AssertionError("mock transcript exhausted")
            entry = self.script[self._cursor]
            self._cursor += 1
        if isinstance(entry, Exception):
            raise entry
        return entry


class HttpTextBackend(TextBackend):
    """POSTs {prompt, system, max_tokens} JSON and expects {"text": ...} back.

    Transport-level retries (exponential backoff) are separate from the
    reconstructor's debug attempts.
    """

    def __init__(
        self,
        base_url: str,
        *,
        model: str | None = None,
        api_key_env: str = "CHARTCYCLE_API_KEY",
        timeout: float = 120.0,
        retries: int = 3,
        backoff: float = 0.5,
        max_per_second: float | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.backend_id = f"http:{self.base_url}" + (f":{model}" if model else "")
        self._limiter = RateLimiter(max_per_second)

    def complete(self, request: GenerationRequest) -> str:
        import httpx

        self._count()
        payload: dict = {"prompt": request.prompt, "max_tokens": request.max_tokens}
        if request.system is not None:
            payload["system"] = request.system
        if self.model is not None:
            payload["model"] = self.model
        headers = {}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error: Exception | None = None
        for attempt in range(self.retries):
            self._limiter.acquire()
            try:
                response = httpx.post(
                    f"{self.base_url}/generate",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout,
                )
                response.raise_for_status()
                return response.json()["text"]
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_error = exc
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff * 2**attempt)
        raise TransportError(f"backend unreachable after {self.retries} attempts: {last_error}")
