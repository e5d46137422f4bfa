"""Uniform access to a chat-completion LLM.

One Gateway fronts either a remote HTTP provider or a scripted mock, adds
a content-addressed disk cache, bounded retry with exponential backoff,
and a semaphore limiting in-flight provider calls. With the mock provider
the whole pipeline is deterministic and offline.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional, Union

PathLike = Union[str, Path]

DEFAULT_MODEL_ID = "gpt-4o-2024-08-06"
DEFAULT_MAX_COMPLETION_TOKENS = 6000


class GatewayError(RuntimeError):
    """Base class for LLM access failures."""


class AuthenticationError(GatewayError):
    """The provider rejected or could not find the credential."""


class RetryExhaustedError(GatewayError):
    """All retry attempts failed with transient errors."""


class TransientProviderError(GatewayError):
    """A retryable provider failure (timeouts, 429s, 5xx)."""


class MockMissError(GatewayError):
    """The mock script has no reply for the requested prompt key."""


@dataclass(frozen=True)
class CompletionRequest:
    system_text: str
    user_text: str
    model_id: str = DEFAULT_MODEL_ID
    temperature: float = 0.0
    max_completion_tokens: int = DEFAULT_MAX_COMPLETION_TOKENS

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_completion_tokens <= 0:
            raise ValueError("max_completion_tokens must be > 0")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    from_cache: bool
    attempt_count: int

    def __post_init__(self) -> None:
        if self.attempt_count < 1:
            raise ValueError("attempt_count must be >= 1")


def normalize_prompt(text: str) -> str:
    """Collapse whitespace runs to single spaces and trim.

    Mock keys digest the normalized prompt so cosmetic template whitespace
    changes do not invalidate scripted replies.
    """
    return re.sub(r"\s+", " ", text).strip()


def mock_key(system_text: str, user_text: str) -> str:
    """Stable digest of the normalized prompt pair."""
    payload = normalize_prompt(system_text) + "\n" + normalize_prompt(user_text)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def cache_key(request: CompletionRequest) -> str:
    """Content address covering every request field."""
    payload = json.dumps(
        [
            request.model_id,
            request.system_text,
            request.user_text,
            request.temperature,
            request.max_completion_tokens,
        ],
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class MockProvider:
    """Scripted provider mapping prompt digests to canned replies."""

    def __init__(self, script: Mapping[str, str]):
        self.script = dict(script)

    @classmethod
    def from_file(cls, path: PathLike) -> "MockProvider":
        return cls(load_mock_script(path))

    def send(self, request: CompletionRequest) -> str:
        key = mock_key(request.system_text, request.user_text)
        try:
            return self.script[key]
        except KeyError:
            raise MockMissError(
                f"mock script has no reply for prompt key {key}"
            ) from None


def load_mock_script(path: PathLike) -> dict[str, str]:
    """Read a line-delimited {key, reply} mock script."""
    script: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                entry = json.loads(stripped)
                script[entry["key"]] = entry["reply"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise GatewayError(f"{path}:{lineno}: bad mock script entry ({exc})") from exc
    return script


def write_mock_script(script: Mapping[str, str], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for key, reply in script.items():
            handle.write(json.dumps({"key": key, "reply": reply}, ensure_ascii=False) + "\n")


class HttpChatProvider:
    """OpenAI-style chat completions over HTTP.

    The credential is read from an environment variable at call time so
    long-running processes pick up rotations.
    """

    def __init__(
        self,
        endpoint: str,
        api_key_env: str = "COLEXPAND_API_KEY",
        timeout: float = 120.0,
    ):
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.timeout = timeout

    def send(self, request: CompletionRequest) -> str:
        import requests

        api_key = os.environ.get(self.api_key_env)
        if not api_key:
            raise AuthenticationError(
                f"environment variable {self.api_key_env} is not set"
            )
        payload = {
            "model": request.model_id,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "max_completion_tokens": request.max_completion_tokens,
        }
        try:
            response = requests.post(
                self.endpoint,
                json=payload,
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise TransientProviderError(str(exc)) from exc
        if response.status_code in (401, 403):
            raise AuthenticationError(f"provider returned {response.status_code}")
        if response.status_code == 429 or response.status_code >= 500:
            raise TransientProviderError(f"provider returned {response.status_code}")
        if response.status_code >= 400:
            raise GatewayError(
                f"provider returned {response.status_code}: {response.text[:200]}"
            )
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed provider response: {exc}") from exc


class Gateway:
    """Caching, retrying front door for all LLM calls.

    The disk cache persists across runs so interrupted lake-scale runs
    resume without re-spending tokens. Thread-safe; at most
    ``parallelism`` provider calls are in flight at once.
    """

    def __init__(
        self,
        provider,
        model_id: str = DEFAULT_MODEL_ID,
        temperature: float = 0.0,
        max_completion_tokens: int = DEFAULT_MAX_COMPLETION_TOKENS,
        cache_dir: Optional[PathLike] = None,
        max_attempts: int = 3,
        backoff_seconds: float = 0.5,
        parallelism: int = 4,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        self.provider = provider
        self.model_id = model_id
        self.temperature = temperature
        self.max_completion_tokens = max_completion_tokens
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        if self.cache_dir is not None:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.max_attempts = max_attempts
        self.backoff_seconds = backoff_seconds
        self._sleep = sleep
        self._limiter = threading.Semaphore(parallelism)
        self._lock = threading.Lock()
        self.request_log: list[CompletionRequest] = []
        self.cache_hits = 0
        self.cache_misses = 0

    def ask(self, system_text: str, user_text: str) -> str:
        """Convenience wrapper using the gateway's default model settings."""
        request = CompletionRequest(
            system_text=system_text,
            user_text=user_text,
            model_id=self.model_id,
            temperature=self.temperature,
            max_completion_tokens=self.max_completion_tokens,
        )
        return self.complete(request).text

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        with self._lock:
            self.request_log.append(request)
        cached = self._cache_read(request)
        if cached is not None:
            with self._lock:
                self.cache_hits += 1
            return CompletionResponse(text=cached, from_cache=True, attempt_count=1)
        with self._lock:
            self.cache_misses += 1
        text, attempts = self._call_provider(request)
        self._cache_write(request, text)
        return CompletionResponse(text=text, from_cache=False, attempt_count=attempts)

    def cache_stats(self) -> dict[str, float]:
        total = self.cache_hits + self.cache_misses
        return {
            "hits": self.cache_hits,
            "misses": self.cache_misses,
            "hit_rate": self.cache_hits / total if total else 0.0,
        }

    def _call_provider(self, request: CompletionRequest) -> tuple[str, int]:
        last_error: Optional[Exception] = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                with self._limiter:
                    return self.provider.send(request), attempt
            except TransientProviderError as exc:
                last_error = exc
                if attempt < self.max_attempts:
                    self._sleep(self.backoff_seconds * (2 ** (attempt - 1)))
        raise RetryExhaustedError(
            f"provider failed after {self.max_attempts} attempts: {last_error}"
        ) from last_error

    def _cache_path(self, request: CompletionRequest) -> Optional[Path]:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{cache_key(request)}.json"

    def _cache_read(self, request: CompletionRequest) -> Optional[str]:
        path = self._cache_path(request)
        if path is None or not path.exists():
            return None
        try:
            with open(path, encoding="utf-8") as handle:
                return json.load(handle)["text"]
        except (ValueError, KeyError):
            return None  # corrupt entry: treat as a miss and overwrite

    def _cache_write(self, request: CompletionRequest, text: str) -> None:
        path = self._cache_path(request)
        if path is None:
            return
        payload = {
            "text": text,
            "model_id": request.model_id,
            "temperature": request.temperature,
            "max_completion_tokens": request.max_completion_tokens,
            "system_text": request.system_text,
            "user_text": request.user_text,
        }
        with self._lock:
            tmp = path.with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as handle:
                json.dump(payload, handle, ensure_ascii=False)
            os.replace(tmp, path)
