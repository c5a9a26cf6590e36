"""Completion backends.

Every backend maps a CompletionRequest to a CompletionResponse. The live
client talks to an OpenAI-compatible ``/v1/completions`` endpoint (raw
prompt in, raw text out, no chat templating). ScriptedBackend and
ReplayBackend are deterministic stand-ins for tests and debugging.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Protocol, Sequence

import httpx

from .codec import ASSISTANT_STOP_TOKENS
from .exceptions import UnexpectedFinishReason
from .tokenizer import DEFAULT_TOKENIZER, Tokenizer

log = logging.getLogger(__name__)


class ConfigurationError(RuntimeError):
    """The server rejected the request (HTTP 4xx); retrying will not help."""


class ScriptExhausted(AssertionError):
    """A scripted backend was queried more times than it has completions."""


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int
    temperature: float = 1.0
    top_p: float = 1.0
    stop: tuple[str, ...] = ASSISTANT_STOP_TOKENS
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")
        if not 0.0 <= self.top_p <= 1.0:
            raise ValueError("top_p must be within [0, 1]")
        missing = set(ASSISTANT_STOP_TOKENS) - set(self.stop)
        if missing:
            raise ValueError(f"stop set must include the assistant terminals, missing {sorted(missing)}")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    estimated: bool = False

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("usage counts must be non-negative")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    finish_reason: str = "stop"
    usage: Usage = field(default_factory=Usage)


class Backend(Protocol):
    def complete(self, req: CompletionRequest) -> CompletionResponse: ...


def estimate_usage(req: CompletionRequest, text: str, tokenizer: Tokenizer) -> Usage:
    return Usage(tokenizer.count(req.prompt), tokenizer.count(text), estimated=True)


class OpenAICompletionsClient:
    """Raw-text client for ``POST {base_url}/completions``.

    Transport errors and 5xx/429 responses are retried with exponential
    backoff; after ``max_attempts`` they surface as UnexpectedFinishReason.
    Other 4xx responses raise ConfigurationError immediately.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        *,
        timeout: float = 600.0,
        max_attempts: int = 4,
        backoff: float = 1.0,
        extra_body: dict[str, Any] | None = None,
        tokenizer: Tokenizer = DEFAULT_TOKENIZER,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self.model = model
        self.max_attempts = max_attempts
        self.backoff = backoff
        # vLLM strips special tokens from text unless told otherwise.
        self.extra_body = {"skip_special_tokens": False, **(extra_body or {})}
        self.tokenizer = tokenizer
        self._sleep = sleep
        self._http = httpx.Client(
            base_url=base_url.rstrip("/"), headers=headers, timeout=timeout, transport=transport
        )

    def payload(self, req: CompletionRequest) -> dict[str, Any]:
        body = {
            "model": self.model,
            "prompt": req.prompt,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
            "top_p": req.top_p,
            "stop": list(req.stop),
            **self.extra_body,
        }
        if req.seed is not None:
            body["seed"] = req.seed
        return body

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        body = self.payload(req)
        last_error = "no attempt made"
        for attempt in range(1, self.max_attempts + 1):
            try:
                resp = self._http.post("/completions", json=body)
            except httpx.TransportError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
            else:
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_error = f"HTTP {resp.status_code}"
                elif resp.status_code >= 400:
                    raise ConfigurationError(f"HTTP {resp.status_code}: {resp.text[:500]}")
                else:
                    return self._parse(req, resp.json())
            log.warning("completion attempt %d/%d failed: %s", attempt, self.max_attempts, last_error)
            if attempt < self.max_attempts:
                self._sleep(self.backoff * 2 ** (attempt - 1))
        raise UnexpectedFinishReason(f"transport failed after {self.max_attempts} attempts: {last_error}")

    def _parse(self, req: CompletionRequest, data: dict) -> CompletionResponse:
        try:
            choice = data["choices"][0]
            text = choice["text"]
        except (KeyError, IndexError, TypeError):
            raise UnexpectedFinishReason(f"malformed completion response: {str(data)[:200]}") from None
        finish = choice.get("finish_reason") or "unknown"
        usage = data.get("usage")
        if usage and "prompt_tokens" in usage and "completion_tokens" in usage:
            u = Usage(usage["prompt_tokens"], usage["completion_tokens"])
        else:
            u = estimate_usage(req, text, self.tokenizer)
        return CompletionResponse(text, finish, u)

    def close(self) -> None:
        self._http.close()


@dataclass(frozen=True)
class ScriptItem:
    text: str
    finish_reason: str = "stop"
    usage: Usage | None = None


class ScriptedBackend:
    """Return pre-written completions in order; querying past the end fails."""

    def __init__(self, script: Sequence[ScriptItem | str | tuple], tokenizer: Tokenizer = DEFAULT_TOKENIZER):
        if not script:
            raise ValueError("script must not be empty")
        self.items = [self._coerce(s) for s in script]
        self.tokenizer = tokenizer
        self.requests: list[CompletionRequest] = []
        self._lock = threading.Lock()

    @staticmethod
    def _coerce(item) -> ScriptItem:
        if isinstance(item, ScriptItem):
            return item
        if isinstance(item, str):
            return ScriptItem(item)
        if isinstance(item, dict):
            usage = item.get("usage")
            return ScriptItem(item["text"], item.get("finish_reason", "stop"), Usage(**usage) if usage else None)
        return ScriptItem(*item)

    @classmethod
    def from_file(cls, path: str | Path, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> "ScriptedBackend":
        """Load a JSON list or JSON-lines file of ``{"text", "finish_reason"}`` items."""
        text = Path(path).read_text()
        stripped = text.lstrip()
        if stripped.startswith("["):
            items = json.loads(text)
        else:
            items = [json.loads(line) for line in text.splitlines() if line.strip()]
        return cls(items, tokenizer)

    @property
    def remaining(self) -> int:
        return len(self.items) - len(self.requests)

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        with self._lock:
            i = len(self.requests)
            if i >= len(self.items):
                raise ScriptExhausted(f"script exhausted after {len(self.items)} completions")
            self.requests.append(req)
        item = self.items[i]
        usage = item.usage or estimate_usage(req, item.text, self.tokenizer)
        return CompletionResponse(item.text, item.finish_reason, usage)


class RecordingBackend:
    """Wrap a backend and append each request/response pair to a JSONL file."""

    def __init__(self, inner: Backend, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self._lock = threading.Lock()

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        resp = self.inner.complete(req)
        record = {"request": asdict(req), "response": asdict(resp)}
        with self._lock, self.path.open("a") as f:
            f.write(json.dumps(record) + "\n")
        return resp


class ReplayBackend:
    """Serve responses captured by RecordingBackend, checking prompts match."""

    def __init__(self, records: Iterable[dict], *, strict: bool = True):
        self.records = list(records)
        self.strict = strict
        self._i = 0

    @classmethod
    def from_file(cls, path: str | Path, **kw) -> "ReplayBackend":
        with open(path) as f:
            return cls((json.loads(line) for line in f if line.strip()), **kw)

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        if self._i >= len(self.records):
            raise ScriptExhausted("replay log exhausted")
        rec = self.records[self._i]
        self._i += 1
        if self.strict and rec["request"]["prompt"] != req.prompt:
            raise AssertionError(f"replayed prompt {self._i} differs from the recorded one")
        r = rec["response"]
        return CompletionResponse(r["text"], r["finish_reason"], Usage(**r["usage"]))
