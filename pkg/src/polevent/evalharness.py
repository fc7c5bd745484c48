"""Score extracted events against a curated gold set.

Matching is entity-to-entity by cosine similarity of the deterministic
local embeddings (whatever embedder the pipeline used, scoring stays
reproducible). Accuracy is matched non-null gold slots over total
non-null gold slots; predicted events are paired to gold events greedily
by descending total slot similarity, each prediction used at most once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence, Union

from .embed import EmbeddingVector, cosine, embed_local
from .engine import Answer
from .errors import AlignmentError, GoldFormatError
from .events import EVENT_PROPERTIES, PoliticalEvent, event_from_object, validate

DEFAULT_TAU = 0.8


@dataclass
class GoldItem:
    question: str
    gold_events: list[PoliticalEvent]


@dataclass
class GoldSet:
    items: list[GoldItem]


@dataclass
class SlotRow:
    """One scored gold slot: what the gold says, what was predicted, and whether they match."""

    question: str
    event_index: int
    slot: str
    gold: str
    predicted: str | None
    score: float | None
    matched: bool

    def to_json(self) -> dict:
        return {
            "question": self.question,
            "event": self.event_index,
            "slot": self.slot,
            "gold": self.gold,
            "predicted": self.predicted,
            "score": self.score,
            "matched": self.matched,
        }


@dataclass
class EvalReport:
    per_slot: list[SlotRow] = field(default_factory=list)
    matched_count: int = 0
    gold_slot_count: int = 0
    accuracy: float = 0.0
    tau: float = DEFAULT_TAU

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "matched": self.matched_count,
            "gold_slots": self.gold_slot_count,
            "tau": self.tau,
            "per_slot": [row.to_json() for row in self.per_slot],
        }

    def table(self) -> str:
        """Human-readable per-slot summary."""
        lines = [f"{'slot':<12} {'matched':>7}  gold -> predicted"]
        for row in self.per_slot:
            mark = "yes" if row.matched else "no"
            predicted = row.predicted if row.predicted is not None else "(none)"
            lines.append(f"{row.slot:<12} {mark:>7}  {row.gold!r} -> {predicted!r}")
        lines.append(
            f"accuracy {self.accuracy:.3f} ({self.matched_count}/{self.gold_slot_count} slots, tau={self.tau})"
        )
        return "\n".join(lines)


@lru_cache(maxsize=65536)
def _embed_cached(text: str) -> EmbeddingVector:
    return embed_local(text)


def match_slot(pred: str, gold: str, tau: float = DEFAULT_TAU) -> tuple[float, bool]:
    """Cosine similarity of the two entity texts and whether it clears tau."""
    score = cosine(_embed_cached(pred), _embed_cached(gold))
    return score, score >= tau


def _pair_score(gold_event: PoliticalEvent, pred_event: PoliticalEvent) -> float:
    total = 0.0
    for name in EVENT_PROPERTIES:
        gold_value = getattr(gold_event, name)
        pred_value = getattr(pred_event, name)
        if gold_value and pred_value:
            total += cosine(_embed_cached(pred_value), _embed_cached(gold_value))
    return total


def _pair_events(
    gold_events: Sequence[PoliticalEvent], predicted: Sequence[PoliticalEvent]
) -> dict[int, int]:
    """Greedy one-to-one pairing by descending total slot similarity."""
    candidates = sorted(
        (
            (-_pair_score(g, p), gi, pi)
            for gi, g in enumerate(gold_events)
            for pi, p in enumerate(predicted)
        ),
    )
    paired: dict[int, int] = {}
    used_predictions: set[int] = set()
    for _neg_score, gi, pi in candidates:
        if gi in paired or pi in used_predictions:
            continue
        paired[gi] = pi
        used_predictions.add(pi)
    return paired


def evaluate(answers: Sequence[Answer], gold: GoldSet, tau: float = DEFAULT_TAU) -> EvalReport:
    """Score answers against the gold set, slot by slot.

    Answers are aligned to gold items by question text; a gold question
    with no answer raises AlignmentError naming it.
    """
    by_question = {answer.question: answer for answer in answers}
    report = EvalReport(tau=tau)
    for item in gold.items:
        answer = by_question.get(item.question)
        if answer is None:
            raise AlignmentError(f"no answer for gold question: {item.question!r}")
        predicted = answer.events
        paired = _pair_events(item.gold_events, predicted)
        for gi, gold_event in enumerate(item.gold_events):
            pred_event = predicted[paired[gi]] if gi in paired else None
            for name in EVENT_PROPERTIES:
                gold_value = getattr(gold_event, name)
                if not gold_value:
                    continue
                pred_value = getattr(pred_event, name) if pred_event else None
                if pred_value:
                    score, matched = match_slot(pred_value, gold_value, tau)
                else:
                    score, matched = None, False
                report.per_slot.append(
                    SlotRow(
                        question=item.question,
                        event_index=gi,
                        slot=name,
                        gold=gold_value,
                        predicted=pred_value,
                        score=score,
                        matched=matched,
                    )
                )
                report.gold_slot_count += 1
                if matched:
                    report.matched_count += 1
    report.accuracy = (
        report.matched_count / report.gold_slot_count if report.gold_slot_count else 0.0
    )
    return report


def load_gold(path: Union[str, Path]) -> GoldSet:
    """Load and validate a gold set file.

    Expected shape: {"items": [{"question": ..., "gold_events": [event...]}]}.
    Any schema violation, invalid gold event, or empty item list raises
    GoldFormatError pointing at the offending item.
    """
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise GoldFormatError(f"cannot read gold file {path}: {exc}") from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("items"), list):
        raise GoldFormatError('gold file must be {"items": [...]}')
    raw_items = payload["items"]
    if not raw_items:
        raise GoldFormatError("gold file has an empty item list")

    items: list[GoldItem] = []
    for pos, raw in enumerate(raw_items):
        where = f"items[{pos}]"
        if not isinstance(raw, dict):
            raise GoldFormatError(f"{where}: not an object")
        question = raw.get("question")
        if not isinstance(question, str) or not question.strip():
            raise GoldFormatError(f"{where}: missing or empty question")
        raw_events = raw.get("gold_events")
        if not isinstance(raw_events, list) or not raw_events:
            raise GoldFormatError(f"{where}: gold_events must be a non-empty list")
        gold_events = []
        for epos, raw_event in enumerate(raw_events):
            if not isinstance(raw_event, dict):
                raise GoldFormatError(f"{where}.gold_events[{epos}]: not an object")
            event = event_from_object(raw_event)
            violations = validate(event)
            if violations:
                raise GoldFormatError(
                    f"{where}.gold_events[{epos}]: invalid gold event: {', '.join(violations)}"
                )
            if not any(getattr(event, name) for name in EVENT_PROPERTIES):
                raise GoldFormatError(f"{where}.gold_events[{epos}]: all property slots empty")
            gold_events.append(event)
        items.append(GoldItem(question=question, gold_events=gold_events))
    return GoldSet(items=items)
