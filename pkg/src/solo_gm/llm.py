"""Chat-completion backends: a real HTTP client and a scripted stand-in.

Both speak the same provider-neutral request shape. The scripted backend
replays canned responses so the whole engine is testable offline, and it
records every request it sees for assertions.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import httpx

logger = logging.getLogger(__name__)

DEFAULT_API_BASE = "https://api.openai.com/v1"
DEFAULT_MODEL = "gpt-4"

ENV_API_KEY = "GM_API_KEY"
ENV_API_BASE = "GM_API_BASE"
ENV_MODEL = "GM_MODEL"


class ChatRole(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass
class RequestOptions:
    """Per-engine request defaults applied to every completion."""

    model: str = DEFAULT_MODEL
    temperature: float = 0.0
    max_tokens: int = 1024


@dataclass
class ChatMessage:
    role: ChatRole
    content: str

    def __post_init__(self):
        # Only assistant placeholders may be empty.
        if not self.content and self.role is not ChatRole.ASSISTANT:
            raise ValueError(f"{self.role.value} messages need content")


@dataclass
class ChatRequest:
    messages: list[ChatMessage]
    model: str = DEFAULT_MODEL
    temperature: float = 0.7
    stop_sequences: list[str] = field(default_factory=list)
    max_tokens: int = 1024

    def __post_init__(self):
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    def last_user_content(self) -> str:
        for message in reversed(self.messages):
            if message.role is ChatRole.USER:
                return message.content
        return ""

    def content_chars(self) -> int:
        return sum(len(m.content) for m in self.messages)


class BackendError(Exception):
    """Base class for completion failures."""


class TransportError(BackendError):
    """Network or provider failure that survived the retry budget."""


class ContentFilterError(BackendError):
    """The provider refused the request on content-policy grounds."""


class ScriptError(BackendError):
    """Scripted backend misuse: bad script file or exhausted entries."""


def apply_stop_sequences(text: str, stop_sequences: list[str]) -> str:
    """Truncate generation before the earliest stop sequence occurrence."""
    cut = len(text)
    for stop in stop_sequences:
        index = text.find(stop)
        if index != -1:
            cut = min(cut, index)
    return text[:cut]


@dataclass
class ScriptEntry:
    response: str
    matcher: str | None = None
    consumed: bool = False


class ScriptedBackend:
    """Deterministic replay of canned responses.

    Entries are consumed in order; an entry with a matcher is only eligible
    when the last user message contains the matcher text. Each complete() call
    takes the first eligible unconsumed entry, applies the request's stop
    sequences, and records the request in the transcript.
    """

    def __init__(self, entries: list[ScriptEntry]):
        self.entries = entries
        self.transcript: list[ChatRequest] = []
        self._lock = threading.Lock()

    @classmethod
    def from_list(cls, raw_entries: list[dict]) -> "ScriptedBackend":
        entries = []
        for index, raw in enumerate(raw_entries):
            if not isinstance(raw, dict) or "response" not in raw:
                raise ScriptError(f"script entry {index} must be an object with a 'response'")
            matcher = raw.get("matcher")
            if matcher is not None and not isinstance(matcher, str):
                raise ScriptError(f"script entry {index}: matcher must be a string")
            if not isinstance(raw["response"], str):
                raise ScriptError(f"script entry {index}: response must be a string")
            entries.append(ScriptEntry(response=raw["response"], matcher=matcher))
        return cls(entries)

    def complete(self, request: ChatRequest) -> str:
        with self._lock:
            self.transcript.append(request)
            last_user = request.last_user_content()
            for entry in self.entries:
                if entry.consumed:
                    continue
                if entry.matcher is not None and entry.matcher not in last_user:
                    continue
                entry.consumed = True
                return apply_stop_sequences(entry.response, request.stop_sequences)
        raise ScriptError(
            f"script exhausted: no entry matches request #{len(self.transcript)}"
        )

    def remaining(self) -> int:
        return sum(1 for entry in self.entries if not entry.consumed)


def load_script(path: str | os.PathLike) -> ScriptedBackend:
    """Load a script file: a UTF-8 JSON array of {matcher?, response} objects."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScriptError(f"{path}: parse error at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, list):
        raise ScriptError(f"{path}: script must be a JSON array of entries")
    return ScriptedBackend.from_list(raw)


RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class HttpBackend:
    """Chat-completion client over HTTP with bounded exponential-backoff retries.

    Endpoint, credentials, and model come from the GM_API_BASE / GM_API_KEY /
    GM_MODEL environment variables unless given explicitly. The request object
    is never mutated, and logs never include the credential.
    """

    def __init__(
        self,
        api_base: str | None = None,
        api_key: str | None = None,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        self.api_base = (api_base or os.environ.get(ENV_API_BASE, DEFAULT_API_BASE)).rstrip("/")
        self._api_key = api_key or os.environ.get(ENV_API_KEY, "")
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._client = httpx.Client(transport=transport, timeout=60.0)

    @staticmethod
    def default_model() -> str:
        return os.environ.get(ENV_MODEL, DEFAULT_MODEL)

    def complete(self, request: ChatRequest) -> str:
        payload = {
            "model": request.model,
            "messages": [
                {"role": m.role.value, "content": m.content} for m in request.messages
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.stop_sequences:
            payload["stop"] = request.stop_sequences
        headers = {"Authorization": f"Bearer {self._api_key}"}
        url = f"{self.api_base}/chat/completions"
        last_error: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                response = self._client.post(url, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                last_error = exc
                logger.warning("completion attempt %d failed: %s", attempt, exc)
            else:
                if response.status_code == 200:
                    return self._extract_text(response.json(), request)
                if self._is_content_filtered(response):
                    raise ContentFilterError(
                        "the provider's content filter refused this request"
                    )
                if response.status_code not in RETRYABLE_STATUS:
                    raise TransportError(
                        f"provider returned HTTP {response.status_code}: {response.text[:200]}"
                    )
                last_error = TransportError(f"provider returned HTTP {response.status_code}")
                logger.warning(
                    "completion attempt %d got HTTP %d", attempt, response.status_code
                )
            if attempt < self.max_attempts:
                self._sleep(self.backoff_base * (2 ** (attempt - 1)))
        raise TransportError(f"completion failed after {self.max_attempts} attempts") from last_error

    def _extract_text(self, data: dict, request: ChatRequest) -> str:
        try:
            choice = data["choices"][0]
        except (KeyError, IndexError) as exc:
            raise TransportError(f"malformed provider response: {data}") from exc
        if choice.get("finish_reason") == "content_filter":
            raise ContentFilterError("the provider's content filter truncated this response")
        text = choice.get("message", {}).get("content") or ""
        # Providers already stop before the token; truncate again defensively.
        return apply_stop_sequences(text, request.stop_sequences)

    @staticmethod
    def _is_content_filtered(response: httpx.Response) -> bool:
        if response.status_code != 400:
            return False
        try:
            error = response.json().get("error", {})
        except ValueError:
            return False
        code = str(error.get("code", ""))
        return "content" in code and ("filter" in code or "policy" in code)
