"""News corpus ingestion: JSON-lines parsing, normalization, filtering, chunking.

Input records follow the News Category Dataset shape (category, headline,
authors, link, short_description, date), but field names are remappable
via an explicit field map because dataset releases disagree on naming.
All operations are pure; dirty input is reported, never fatal.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import BinaryIO, Iterable, Union

from .errors import CorpusIOError, EmptyCorpusError

# Canonical field name -> key in the source JSON. Defaults target the
# News Category Dataset release names.
DEFAULT_FIELD_MAP: dict[str, str] = {
    "category": "category",
    "headline": "headline",
    "authors": "authors",
    "link": "link",
    "short_description": "short_description",
    "date": "date",
}

_DATE_FORMATS = ("%Y-%m-%d", "%Y/%m/%d", "%m/%d/%Y", "%b %d, %Y", "%B %d, %Y")

CHUNK_SEPARATOR = " — "
MIN_CHUNK_CHARS = 64


@dataclass(frozen=True)
class RawRecord:
    """One news record as read from the source file, fields untouched."""

    category: str
    headline: str
    authors: str
    link: str
    short_description: str
    date: str


@dataclass(frozen=True)
class Document:
    """A normalized news record that passed the corpus filter."""

    doc_id: str
    headline: str
    body: str
    author: str | None
    published: date
    category: str
    source_link: str | None


@dataclass(frozen=True)
class Chunk:
    """Indexable text unit; the granularity of retrieval and attribution."""

    chunk_id: str
    text: str
    doc_ref: str


@dataclass(frozen=True)
class Reject:
    """A line or record that could not be used, with the reason why."""

    line: int
    reason: str

    def to_json(self) -> dict:
        return {"line": self.line, "reason": self.reason}


@dataclass(frozen=True)
class CorpusFilter:
    """Inclusive date window plus an optional category whitelist."""

    date_from: date = date(2020, 1, 1)
    date_to: date = date(2022, 12, 31)
    categories: frozenset[str] = frozenset({"POLITICS"})

    def __post_init__(self):
        if self.date_from > self.date_to:
            raise ValueError(f"date_from {self.date_from} is after date_to {self.date_to}")


@dataclass(frozen=True)
class ChunkPolicy:
    max_chars: int = 512

    def __post_init__(self):
        if self.max_chars < MIN_CHUNK_CHARS:
            raise ValueError(f"max_chars must be >= {MIN_CHUNK_CHARS}, got {self.max_chars}")


@dataclass
class CorpusConfig:
    """Everything the ingestion pipeline needs, bundled for the engine/CLI."""

    field_map: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_FIELD_MAP))
    filter: CorpusFilter = field(default_factory=CorpusFilter)
    chunk: ChunkPolicy = field(default_factory=ChunkPolicy)


def parse_date(text: str) -> date:
    """Parse a calendar date from the handful of formats seen in the wild."""
    cleaned = text.strip()
    for fmt in _DATE_FORMATS:
        try:
            return datetime.strptime(cleaned, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unparseable date: {text!r}")


def parse_jsonl(
    source: Union[str, Path, bytes, BinaryIO],
    field_map: dict[str, str] | None = None,
) -> tuple[list[RawRecord], list[Reject]]:
    """Parse newline-delimited JSON into raw records.

    Returns (records, rejects): one record per well-formed line in file
    order; malformed lines land in the rejects list with their 1-based
    line number. Raises CorpusIOError if the source cannot be read and
    EmptyCorpusError if not a single line is well-formed.
    """
    fmap = field_map if field_map is not None else DEFAULT_FIELD_MAP
    try:
        if isinstance(source, (str, Path)):
            data = Path(source).read_bytes()
        elif isinstance(source, bytes):
            data = source
        else:
            data = source.read()
    except OSError as exc:
        raise CorpusIOError(f"cannot read corpus: {exc}") from exc

    records: list[RawRecord] = []
    rejects: list[Reject] = []
    for lineno, raw_line in enumerate(data.splitlines(), start=1):
        line = raw_line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            rejects.append(Reject(lineno, f"invalid JSON: {exc}"))
            continue
        if not isinstance(obj, dict):
            rejects.append(Reject(lineno, "line is not a JSON object"))
            continue

        def text_field(name: str) -> str:
            value = obj.get(fmap.get(name, name), "")
            return value.strip() if isinstance(value, str) else ""

        headline = text_field("headline")
        if not headline:
            rejects.append(Reject(lineno, "missing or empty headline"))
            continue
        date_text = text_field("date")
        try:
            parse_date(date_text)
        except ValueError:
            rejects.append(Reject(lineno, f"unparseable date: {date_text!r}"))
            continue
        records.append(
            RawRecord(
                category=text_field("category"),
                headline=headline,
                authors=text_field("authors"),
                link=text_field("link"),
                short_description=text_field("short_description"),
                date=date_text,
            )
        )

    if not records:
        raise EmptyCorpusError("no well-formed records in input")
    return records, rejects


def _derive_doc_id(record: RawRecord, taken: set[str]) -> str:
    basis = "|".join((record.headline, record.date, record.category, record.authors, record.link))
    digest = hashlib.sha1(basis.encode("utf-8")).hexdigest()[:16]
    doc_id = f"d{digest}"
    serial = 2
    while doc_id in taken:
        doc_id = f"d{digest}-{serial}"
        serial += 1
    taken.add(doc_id)
    return doc_id


def normalize_filter(
    records: Iterable[RawRecord],
    corpus_filter: CorpusFilter | None = None,
) -> tuple[list[Document], list[Reject]]:
    """Normalize raw records into documents and apply the corpus filter.

    Records outside the date window or category set are silently dropped
    (that is the filter doing its job); records that cannot be normalized
    at all (unparseable date) are returned as rejects. Authors equal to
    "Unnamed" or empty map to author=None; doc ids are content-derived so
    repeated runs over the same corpus produce identical documents.
    """
    cf = corpus_filter if corpus_filter is not None else CorpusFilter()
    docs: list[Document] = []
    rejects: list[Reject] = []
    taken: set[str] = set()
    for position, rec in enumerate(records, start=1):
        try:
            published = parse_date(rec.date)
        except ValueError as exc:
            rejects.append(Reject(position, str(exc)))
            continue
        if not (cf.date_from <= published <= cf.date_to):
            continue
        if cf.categories and rec.category not in cf.categories:
            continue
        author = rec.authors.strip()
        if not author or author.lower() == "unnamed":
            author = None
        link = rec.link.strip() or None
        docs.append(
            Document(
                doc_id=_derive_doc_id(rec, taken),
                headline=rec.headline.strip(),
                body=rec.short_description.strip(),
                author=author,
                published=published,
                category=rec.category,
                source_link=link,
            )
        )
    return docs, rejects


def _split_budget(text: str, max_chars: int) -> list[str]:
    """Split text into pieces of at most max_chars, at whitespace when possible."""
    pieces: list[str] = []
    remaining = text
    while len(remaining) > max_chars:
        window = remaining[: max_chars + 1]
        cut = max((window.rfind(ch) for ch in (" ", "\t", "\n")), default=-1)
        if cut <= 0:
            cut = max_chars
        pieces.append(remaining[:cut].rstrip())
        remaining = remaining[cut:].lstrip()
    if remaining:
        pieces.append(remaining)
    return pieces


def chunk_documents(docs: Iterable[Document], policy: ChunkPolicy | None = None) -> list[Chunk]:
    """Cut documents into indexable chunks.

    Chunk text is the headline joined to the body (headline alone when the
    body is empty), split at the last whitespace before the budget when over
    it. Every document yields at least one chunk; ids are doc_id#ordinal.
    """
    pol = policy if policy is not None else ChunkPolicy()
    chunks: list[Chunk] = []
    for doc in docs:
        text = doc.headline + CHUNK_SEPARATOR + doc.body if doc.body else doc.headline
        for ordinal, piece in enumerate(_split_budget(text, pol.max_chars)):
            chunks.append(Chunk(chunk_id=f"{doc.doc_id}#{ordinal}", text=piece, doc_ref=doc.doc_id))
    return chunks


def document_to_json(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "headline": doc.headline,
        "body": doc.body,
        "author": doc.author,
        "published": doc.published.isoformat(),
        "category": doc.category,
        "source_link": doc.source_link,
    }


def document_from_json(obj: dict) -> Document:
    return Document(
        doc_id=obj["doc_id"],
        headline=obj["headline"],
        body=obj.get("body", ""),
        author=obj.get("author"),
        published=date.fromisoformat(obj["published"]),
        category=obj.get("category", ""),
        source_link=obj.get("source_link"),
    )


def save_documents(docs: Iterable[Document], path: Union[str, Path]) -> None:
    lines = [json.dumps(document_to_json(d), ensure_ascii=False, sort_keys=True) for d in docs]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_documents(path: Union[str, Path]) -> list[Document]:
    docs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            docs.append(document_from_json(json.loads(line)))
    return docs


def save_rejects(rejects: Iterable[Reject], path: Union[str, Path]) -> None:
    lines = [json.dumps(r.to_json(), sort_keys=True) for r in rejects]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


_WS = re.compile(r"\s+")


def joined_chunk_text(chunks: Iterable[Chunk]) -> str:
    """Whitespace-normalized concatenation of chunk texts, for round-trip checks."""
    return _WS.sub(" ", " ".join(c.text for c in chunks)).strip()
