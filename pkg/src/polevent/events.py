"""Political event records: schema, validation, parsing from LLM text,
and source attribution.

An event is described by eight properties: actor (agent performing the
action), action, recipient (actor receiving the action), instrument
(object or means used), reason (cause), time, location, and reporter
(source reporting the event). A record is valid when it has an action
and at least one of actor/recipient; everything else is optional.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Sequence

from .errors import EventParseError
from .index import RetrievalHit

EVENT_PROPERTIES = (
    "actor",
    "action",
    "recipient",
    "instrument",
    "reason",
    "time",
    "location",
    "reporter",
)

MISSING_ACTION = "MissingAction"
MISSING_PARTICIPANT = "MissingParticipant"
UNKNOWN_SOURCE = "UnknownSource"
MISSING_SOURCES = "MissingSources"
NOT_AN_OBJECT = "NotAnObject"

MAX_PARSE_BYTES = 1 << 20


@dataclass(frozen=True)
class PoliticalEvent:
    """One extracted event; absent properties are None."""

    actor: str | None = None
    action: str | None = None
    recipient: str | None = None
    instrument: str | None = None
    reason: str | None = None
    time: str | None = None
    location: str | None = None
    reporter: str | None = None
    sources: tuple[str, ...] = ()

    def to_json(self) -> dict:
        """Canonical JSON shape: the eight properties plus sources, null for absent."""
        obj = {name: getattr(self, name) for name in EVENT_PROPERTIES}
        obj["sources"] = list(self.sources)
        return obj


@dataclass
class ExtractionResult:
    """Outcome of parsing one LLM response.

    Every parsed object lands in exactly one of events (valid) or invalid
    (with its violation list); raw_text preserves the model output verbatim
    for audit.
    """

    events: list[PoliticalEvent] = field(default_factory=list)
    invalid: list[tuple[object, list[str]]] = field(default_factory=list)
    raw_text: str = ""


def validate(e: PoliticalEvent) -> list[str]:
    """Return the list of validity violations; empty means valid.

    A valid event has an action and at least one participant (actor or
    recipient). No other property is required.
    """
    violations = []
    if not e.action:
        violations.append(MISSING_ACTION)
    if not e.actor and not e.recipient:
        violations.append(MISSING_PARTICIPANT)
    return violations


_FENCE_RE = re.compile(r"```(?:[A-Za-z0-9_-]+)?\s*(.*?)```", re.DOTALL)

_DATE_PATTERNS = (
    "%Y-%m-%d",
    "%Y/%m/%d",
    "%m/%d/%Y",
    "%b %d, %Y",
    "%B %d, %Y",
    "%d %B %Y",
    "%d %b %Y",
)


def canonicalize_time(value: str) -> str:
    """Best-effort ISO-8601 for recognizable dates; vague phrases pass through."""
    text = value.strip()
    for fmt in _DATE_PATTERNS:
        try:
            return datetime.strptime(text, fmt).date().isoformat()
        except ValueError:
            continue
    return text


def _balanced_span(text: str, start: int) -> str | None:
    """Extract the bracket-balanced JSON span beginning at text[start]."""
    opener = text[start]
    closer = "]" if opener == "[" else "}"
    depth = 0
    in_string = False
    escaped = False
    for pos in range(start, len(text)):
        ch = text[pos]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
            if depth == 0:
                if ch == closer:
                    return text[start : pos + 1]
                return None
    return None


def _candidate_payloads(text: str):
    for fenced in _FENCE_RE.findall(text):
        yield fenced
    yield text


def _locate_json(text: str):
    """Find the first top-level JSON array (or object, promoted to a 1-array)."""
    for payload in _candidate_payloads(text):
        for match in re.finditer(r"[\[{]", payload):
            span = _balanced_span(payload, match.start())
            if span is None:
                continue
            try:
                value = json.loads(span)
            except json.JSONDecodeError:
                continue
            if isinstance(value, list):
                return value
            if isinstance(value, dict):
                return [value]
    return None


def _coerce_slot(value) -> str | None:
    if value is None:
        return None
    if isinstance(value, str):
        return value.strip() or None
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, float)):
        return str(value)
    return None


def _coerce_sources(value) -> tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        return (value.strip(),) if value.strip() else ()
    if isinstance(value, list):
        return tuple(str(v).strip() for v in value if str(v).strip())
    return ()


def event_from_object(obj: dict) -> PoliticalEvent:
    """Build an event from a parsed JSON object, ignoring unknown keys."""
    slots = {name: _coerce_slot(obj.get(name)) for name in EVENT_PROPERTIES}
    if slots["time"]:
        slots["time"] = canonicalize_time(slots["time"])
    return PoliticalEvent(sources=_coerce_sources(obj.get("sources")), **slots)


def parse_events(llm_text: str) -> ExtractionResult:
    """Parse event records out of raw LLM output.

    Locates the first top-level JSON array (or lone object) in the text,
    tolerating surrounding prose and fenced code blocks. Each object is
    validated; valid ones become events, the rest land in invalid with
    their violations. Raises EventParseError when no JSON can be found,
    and nothing else: arbitrary input is either parsed or rejected.
    """
    if len(llm_text.encode("utf-8", errors="replace")) > MAX_PARSE_BYTES:
        raise EventParseError("LLM output exceeds 1 MB", raw_text=llm_text[:4096])
    try:
        items = _locate_json(llm_text)
    except RecursionError as exc:  # pathological nesting depth
        raise EventParseError(f"unparseable output: {exc}", raw_text=llm_text) from exc
    if items is None:
        raise EventParseError("no JSON array or object in LLM output", raw_text=llm_text)

    result = ExtractionResult(raw_text=llm_text)
    for item in items:
        if not isinstance(item, dict):
            result.invalid.append((item, [NOT_AN_OBJECT]))
            continue
        event = event_from_object(item)
        violations = validate(event)
        if violations:
            result.invalid.append((item, violations))
        else:
            result.events.append(event)
    return result


def attach_sources(
    result: ExtractionResult,
    hits: Sequence[RetrievalHit],
    require_sources: bool = True,
) -> ExtractionResult:
    """Resolve S-tags in event sources to the chunk ids of the prompt's hits.

    `hits` must be exactly the retrieval set the prompt included, in prompt
    order, so that S1 names hits[0] and so on. Events citing tags outside
    that set are demoted to invalid with UnknownSource; with require_sources
    set (attribution on), events citing nothing are demoted as well.
    """
    tag_map = {f"S{n}": hit.chunk_id for n, hit in enumerate(hits, start=1)}
    tag_map.update({hit.chunk_id: hit.chunk_id for hit in hits})

    attributed = ExtractionResult(raw_text=result.raw_text, invalid=list(result.invalid))
    for event in result.events:
        resolved = []
        violations = []
        for tag in event.sources:
            mapped = tag_map.get(tag)
            if mapped is None:
                violations.append(UNKNOWN_SOURCE)
            else:
                resolved.append(mapped)
        if require_sources and not resolved and not violations:
            violations.append(MISSING_SOURCES)
        if violations:
            attributed.invalid.append((event.to_json(), violations))
        else:
            attributed.events.append(replace(event, sources=tuple(dict.fromkeys(resolved))))
    return attributed
