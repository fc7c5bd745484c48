"""Prompt assembly: wrap retrieved context and the analyst question in the
system/wrapper templates, within a character budget.

Context passages carry S-tags ("[S1: <chunk_id>]") so the model has citable
anchors; the events module maps those tags back to chunks afterwards.
The default prompts are original to this project.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

from .errors import PromptBudgetError
from .events import EVENT_PROPERTIES
from .index import RetrievalHit

DEFAULT_BUDGET_CHARS = 12000
MIN_BUDGET_CHARS = 512

SCHEMA_BLOCK = (
    '"actor" (agent performing the action), '
    '"action" (the action itself), '
    '"recipient" (actor receiving the action), '
    '"instrument" (object or means used to carry out the action), '
    '"reason" (cause of the event), '
    '"time" (when it occurred, ISO-8601 when known), '
    '"location" (where it occurred), '
    '"reporter" (source that reported the event), '
    '"sources" (list of S-tags of the supporting passages)'
)

DEFAULT_SYSTEM_TEXT = (
    "You are a political event extraction assistant. Extract political events "
    "from the numbered context passages supplied by the user, and from those "
    "passages only. Respond with a JSON array of event objects and no prose. "
    "Each object has exactly these keys: {schema}. Use null for any property "
    "the passages do not state. Every event's \"sources\" must list the S-tags "
    'of the passages that support it (for example ["S1"]). If the passages '
    "describe no political event, respond with []."
)

DEFAULT_WRAPPER_TEXT = (
    "Context passages:\n{context}\n\nQuestion: {question}\n\n"
    "Extract the political events that answer the question as a JSON array."
)


@dataclass(frozen=True)
class PromptTemplate:
    """System text with a {schema} slot; wrapper with {context} and {question}."""

    system_text: str = DEFAULT_SYSTEM_TEXT
    wrapper_text: str = DEFAULT_WRAPPER_TEXT

    def __post_init__(self):
        if self.system_text.count("{schema}") != 1:
            raise ValueError("system_text must contain {schema} exactly once")
        for name in ("{context}", "{question}"):
            if self.wrapper_text.count(name) != 1:
                raise ValueError(f"wrapper_text must contain {name} exactly once")


@dataclass(frozen=True)
class AssembledPrompt:
    """A rendered prompt plus the ordered chunk ids it actually includes."""

    system: str
    user: str
    context_ids: tuple[str, ...]


def load_template(
    system_path: Union[str, Path, None] = None,
    wrapper_path: Union[str, Path, None] = None,
) -> PromptTemplate:
    """Load template texts from plain-text files, defaulting where unset."""
    system_text = (
        Path(system_path).read_text(encoding="utf-8") if system_path else DEFAULT_SYSTEM_TEXT
    )
    wrapper_text = (
        Path(wrapper_path).read_text(encoding="utf-8") if wrapper_path else DEFAULT_WRAPPER_TEXT
    )
    return PromptTemplate(system_text=system_text, wrapper_text=wrapper_text)


def _context_block(hits: Sequence[RetrievalHit]) -> str:
    return "\n".join(
        f"[S{n}: {hit.chunk_id}] {hit.text}" for n, hit in enumerate(hits, start=1)
    )


def render(
    template: PromptTemplate,
    question: str,
    hits: Sequence[RetrievalHit],
    budget_chars: int = DEFAULT_BUDGET_CHARS,
) -> AssembledPrompt:
    """Assemble the prompt around as many hits as fit the character budget.

    Hits are consumed greedily in the order given (descending score):
    appending stops at the first hit that would push the user text over
    the budget. Raises PromptBudgetError when not even one hit fits.
    """
    if not question.strip():
        raise ValueError("question must be non-empty")
    if budget_chars < MIN_BUDGET_CHARS:
        raise ValueError(f"budget_chars must be >= {MIN_BUDGET_CHARS}, got {budget_chars}")

    included: list[RetrievalHit] = []
    user = None
    for hit in hits:
        candidate = template.wrapper_text.format(
            context=_context_block(included + [hit]), question=question
        )
        if len(candidate) > budget_chars:
            break
        included.append(hit)
        user = candidate
    if not included or user is None:
        raise PromptBudgetError(
            f"no retrieved context fits the {budget_chars}-char budget"
        )

    system = template.system_text.format(schema=SCHEMA_BLOCK)
    return AssembledPrompt(
        system=system,
        user=user,
        context_ids=tuple(hit.chunk_id for hit in included),
    )
