"""Chat-completion backends.

``LiveBackend`` talks to any OpenAI-compatible ``/v1/chat/completions``
endpoint. ``ReplayBackend`` serves stored responses from a JSONL file keyed
by request hash, which keeps tests and reruns hermetic. ``CachedBackend``
puts an append-only JSONL cache in front of another backend.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Protocol, Sequence, Union

import httpx

log = logging.getLogger(__name__)

API_KEY_ENV = "OPENAI_API_KEY"
DEFAULT_MODEL = "gpt-3.5-turbo-0613"
DEFAULT_ENDPOINT = "https://api.openai.com"
RETRY_STATUS = frozenset({408, 409, 429, 500, 502, 503, 504})


class LlmError(RuntimeError):
    pass


class TransportError(LlmError):
    def __init__(self, message: str, status: Optional[int] = None, attempts: int = 0):
        super().__init__(message)
        self.status = status
        self.attempts = attempts


class ReplayMiss(LlmError):
    def __init__(self, cache_key: str):
        super().__init__(f"no stored response for cache key {cache_key}")
        self.cache_key = cache_key


@dataclass(frozen=True)
class ChatRequest:
    model_name: str
    system_text: str
    user_text: str
    temperature: float = 0.0
    max_output_tokens: int = 256

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")

    @property
    def cache_key(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def messages(self) -> list[dict]:
        return [
            {"role": "system", "content": self.system_text},
            {"role": "user", "content": self.user_text},
        ]

    def summary(self) -> dict:
        return {
            "model_name": self.model_name,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "system_sha256": hashlib.sha256(self.system_text.encode("utf-8")).hexdigest(),
            "user_text": self.user_text,
        }


@dataclass(frozen=True)
class LlmExchange:
    request: ChatRequest
    response_text: str
    latency_ms: float
    source: str  # "live" | "cache" | "replay"

    @property
    def cache_key(self) -> str:
        return self.request.cache_key


class Backend(Protocol):
    name: str

    def complete(self, request: ChatRequest) -> LlmExchange: ...


class ResponseCache:
    """Append-only JSONL store of ``{cache_key, request, response_text}`` records.

    The first record for a key wins; later duplicates in the file are ignored.
    """

    def __init__(self, path: str | Path | None = None, records: Optional[Iterable[dict]] = None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._store: dict[str, str] = {}
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as f:
                for lineno, line in enumerate(f, start=1):
                    if not line.strip():
                        continue
                    try:
                        rec = json.loads(line)
                        self._store.setdefault(rec["cache_key"], rec["response_text"])
                    except (json.JSONDecodeError, KeyError, TypeError) as exc:
                        raise ValueError(f"{self.path}:{lineno}: bad cache record ({exc})") from None
        for rec in records or ():
            self._store.setdefault(rec["cache_key"], rec["response_text"])

    def __len__(self) -> int:
        return len(self._store)

    def __contains__(self, key: object) -> bool:
        return key in self._store

    def get(self, key: str) -> Optional[str]:
        return self._store.get(key)

    def put(self, request: ChatRequest, response_text: str) -> None:
        key = request.cache_key
        with self._lock:
            if key in self._store:
                return
            self._store[key] = response_text
            if self.path is not None:
                rec = {"cache_key": key, "request": request.summary(), "response_text": response_text}
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


class ReplayBackend:
    """Serve responses from a stored cache; never touches the network."""

    def __init__(self, cache: ResponseCache | str | Path, source: str = "replay"):
        self.cache = cache if isinstance(cache, ResponseCache) else ResponseCache(cache)
        self.source = source
        self.name = "replay" if source == "replay" else "cache-only"

    def complete(self, request: ChatRequest) -> LlmExchange:
        start = time.perf_counter()
        text = self.cache.get(request.cache_key)
        if text is None:
            raise ReplayMiss(request.cache_key)
        return LlmExchange(request, text, (time.perf_counter() - start) * 1000, self.source)


class LiveBackend:
    """OpenAI-compatible HTTP backend with exponential-backoff retries."""

    name = "live"

    def __init__(
        self,
        endpoint: str = DEFAULT_ENDPOINT,
        api_key: Optional[str] = None,
        timeout: float = 60.0,
        max_attempts: int = 5,
        backoff: float = 1.0,
        max_backoff: float = 60.0,
        client: Optional[httpx.Client] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self.url = endpoint.rstrip("/") + "/v1/chat/completions"
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not self.api_key:
            raise LlmError(f"live backend needs an API key in ${API_KEY_ENV}")
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.max_backoff = max_backoff
        self._sleep = sleep
        self._client = client or httpx.Client(timeout=timeout)

    def close(self) -> None:
        self._client.close()

    def _delay(self, attempt: int, response: Optional[httpx.Response]) -> float:
        if response is not None:
            retry_after = response.headers.get("retry-after")
            if retry_after:
                try:
                    return min(float(retry_after), self.max_backoff)
                except ValueError:
                    pass
        return min(self.backoff * 2 ** (attempt - 1), self.max_backoff)

    def complete(self, request: ChatRequest) -> LlmExchange:
        body = {
            "model": request.model_name,
            "messages": request.messages(),
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last_error = "no attempt made"
        last_status = None
        start = time.perf_counter()
        for attempt in range(1, self.max_attempts + 1):
            response = None
            try:
                response = self._client.post(self.url, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last_error, last_status = f"timeout: {exc}", None
            except httpx.TransportError as exc:
                last_error, last_status = f"transport failure: {exc}", None
            else:
                if response.status_code == 200:
                    try:
                        text = response.json()["choices"][0]["message"]["content"] or ""
                    except (ValueError, KeyError, IndexError, TypeError) as exc:
                        raise TransportError(f"malformed completion payload: {exc}", 200, attempt) from None
                    return LlmExchange(request, text, (time.perf_counter() - start) * 1000, "live")
                last_error, last_status = f"HTTP {response.status_code}: {response.text[:200]}", response.status_code
                if response.status_code not in RETRY_STATUS:
                    raise TransportError(last_error, last_status, attempt)
            if attempt < self.max_attempts:
                delay = self._delay(attempt, response)
                log.warning("chat completion attempt %d/%d failed (%s); retrying in %.1fs",
                            attempt, self.max_attempts, last_error, delay)
                self._sleep(delay)
        raise TransportError(
            f"gave up after {self.max_attempts} attempts: {last_error}", last_status, self.max_attempts
        )


class CachedBackend:
    """Check ``cache`` first; store whatever ``inner`` returns."""

    def __init__(self, inner: Backend, cache: ResponseCache):
        self.inner = inner
        self.cache = cache
        self.name = inner.name

    def complete(self, request: ChatRequest) -> LlmExchange:
        start = time.perf_counter()
        text = self.cache.get(request.cache_key)
        if text is not None:
            return LlmExchange(request, text, (time.perf_counter() - start) * 1000, "cache")
        exchange = self.inner.complete(request)
        self.cache.put(request, exchange.response_text)
        return exchange


ExchangeOrError = Union[LlmExchange, Exception]


def complete(backend: Backend, request: ChatRequest) -> LlmExchange:
    return backend.complete(request)


def batch_complete(
    backend: Backend, requests: Sequence[ChatRequest], parallelism: int = 1
) -> list[ExchangeOrError]:
    """Run ``requests`` with at most ``parallelism`` in flight.

    Results come back in input order. A failing request yields its exception
    in place instead of aborting the batch.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")

    def one(req: ChatRequest) -> ExchangeOrError:
        try:
            return backend.complete(req)
        except Exception as exc:  # per-item isolation
            return exc

    if parallelism == 1 or len(requests) <= 1:
        return [one(r) for r in requests]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, requests))
