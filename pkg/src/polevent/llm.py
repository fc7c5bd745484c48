"""Chat-completion client for OpenAI-compatible endpoints, plus a scripted
mock that makes the whole pipeline testable offline.

The real client retries transient failures (connect errors, HTTP 429/5xx)
up to 3 times with exponential backoff starting at 500 ms; other 4xx fail
fast. The bearer token is read from the environment and never echoed into
errors or logs.
"""

from __future__ import annotations

import json
import math
import os
import random
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import requests

from .errors import EndpointError, RequestTimeoutError, TransportError
from .events import EVENT_PROPERTIES
from .prompt import AssembledPrompt

API_KEY_ENV = "POLEVENT_API_KEY"

MAX_RETRIES = 3  # retries after the first attempt
BACKOFF_START_S = 0.5

CORRUPTED_TOKEN = "CORRUPTED"


@dataclass
class LlmConfig:
    endpoint: str
    model: str
    temperature: float = 0.0
    max_tokens: int = 1024
    timeout: float = 30.0
    api_key_env: str = API_KEY_ENV
    backoff_start: float = BACKOFF_START_S

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str  # "stop" | "length" | "other"
    usage: dict | None = None


def _finish_reason(raw) -> str:
    return raw if raw in ("stop", "length") else "other"


def complete(
    prompt: AssembledPrompt,
    config: LlmConfig,
    sleep: Callable[[float], None] = time.sleep,
) -> ChatResponse:
    """POST the prompt to <endpoint>/v1/chat/completions and return the reply.

    Raises TransportError when the retry budget is exhausted, EndpointError
    for non-retryable HTTP statuses, and RequestTimeoutError on timeout.
    """
    url = config.endpoint.rstrip("/") + "/v1/chat/completions"
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(config.api_key_env, "")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    body = {
        "model": config.model,
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
        "messages": [
            {"role": "system", "content": prompt.system},
            {"role": "user", "content": prompt.user},
        ],
    }

    last_failure = "no attempt made"
    for attempt in range(MAX_RETRIES + 1):
        if attempt:
            sleep(config.backoff_start * (2 ** (attempt - 1)))
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=config.timeout)
        except requests.exceptions.ConnectTimeout:
            last_failure = "connect timeout"
            continue
        except requests.exceptions.Timeout as exc:
            raise RequestTimeoutError(
                f"chat completion timed out after {config.timeout}s"
            ) from exc
        except requests.RequestException as exc:
            last_failure = type(exc).__name__
            continue

        if resp.status_code == 429 or resp.status_code >= 500:
            last_failure = f"HTTP {resp.status_code}"
            continue
        if resp.status_code != 200:
            raise EndpointError(resp.status_code, resp.text[:200])
        try:
            payload = resp.json()
            choice = payload["choices"][0]
            text = choice["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise EndpointError(resp.status_code, f"malformed completion payload: {exc}")
        return ChatResponse(
            text=text if isinstance(text, str) else "",
            finish_reason=_finish_reason(choice.get("finish_reason")),
            usage=payload.get("usage"),
        )

    raise TransportError(
        f"chat completion failed after {MAX_RETRIES + 1} attempts (last: {last_failure})"
    )


@dataclass(frozen=True)
class MockRule:
    """Emit `event` whenever a context passage contains `pattern`."""

    pattern: str
    event: dict


@dataclass
class MockScript:
    """Scripted responses for hermetic runs: pattern -> canned event.

    With a nonzero corruption rate, exactly floor(rate * total filled
    slots) slot values in the response are replaced by a fixed token,
    chosen pseudo-randomly from the given seed. Useful for exercising the
    evaluation harness with a known expected accuracy.
    """

    rules: list[MockRule] = field(default_factory=list)
    corruption_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.corruption_rate <= 1.0:
            raise ValueError("corruption_rate must be in [0, 1]")

    @classmethod
    def from_json(cls, obj: dict) -> "MockScript":
        rules = [
            MockRule(pattern=r["pattern"], event=dict(r["event"]))
            for r in obj.get("rules", [])
        ]
        return cls(
            rules=rules,
            corruption_rate=float(obj.get("corruption_rate", 0.0)),
            seed=int(obj.get("seed", 0)),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "MockScript":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


_S_TAG_RE = re.compile(r"\[(S\d+): ([^\]]+)\]")


def _context_segments(user_text: str) -> list[tuple[str, str, str]]:
    """Split the rendered user text into (tag, chunk_id, following text) blocks."""
    matches = list(_S_TAG_RE.finditer(user_text))
    segments = []
    for i, m in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(user_text)
        segments.append((m.group(1), m.group(2), user_text[m.end() : end]))
    return segments


def mock_complete(prompt: AssembledPrompt, script: MockScript) -> ChatResponse:
    """Deterministic stand-in for complete(): same inputs, same output text.

    For every context passage whose text contains a rule's pattern
    (case-insensitive), the rule's event is emitted with that passage's
    S-tag as its sources. Unmatched context yields an empty array.
    """
    emitted: list[dict] = []
    for tag, _chunk_id, text in _context_segments(prompt.user):
        lowered = text.lower()
        for rule in script.rules:
            if rule.pattern.lower() in lowered:
                event = dict(rule.event)
                event["sources"] = [tag]
                emitted.append(event)

    if script.corruption_rate > 0.0 and emitted:
        slots = [
            (i, name)
            for i, event in enumerate(emitted)
            for name in EVENT_PROPERTIES
            if event.get(name) not in (None, "")
        ]
        n_corrupt = math.floor(script.corruption_rate * len(slots))
        rng = random.Random(script.seed)
        for i, name in rng.sample(slots, n_corrupt) if n_corrupt else []:
            emitted[i][name] = CORRUPTED_TOKEN

    return ChatResponse(text=json.dumps(emitted), finish_reason="stop", usage=None)
