"""End-to-end pipeline: build an index from a news corpus, then
question -> retrieve -> prompt -> complete -> parse -> attribute.

Build writes four artifacts into the output directory: the binary vector
index, the chunk sidecar, the document store, and a metadata file that
pins the embedder (kind/dim/model) so a query can refuse an index built
with a different embedder instead of silently returning garbage.
"""

from __future__ import annotations

import json
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from .corpus import (
    Chunk,
    CorpusConfig,
    Document,
    chunk_documents,
    load_documents,
    normalize_filter,
    parse_jsonl,
    save_documents,
)
from .embed import EmbedderConfig, embed_texts
from .errors import (
    EmbedderMismatchError,
    EmptyCorpusError,
    EventParseError,
    QueryOnEmptyIndexError,
)
from .events import PoliticalEvent, attach_sources, parse_events
from .index import ChunkStore, RetrievalHit, VectorIndex
from .llm import LlmConfig, MockScript, complete, mock_complete
from .prompt import DEFAULT_BUDGET_CHARS, PromptTemplate, render

INDEX_FILE = "index.pevi"
CHUNKS_FILE = "chunks.jsonl"
DOCS_FILE = "docs.jsonl"
META_FILE = "meta.json"

META_VERSION = 1


@dataclass
class EngineConfig:
    k: int = 5
    budget_chars: int = DEFAULT_BUDGET_CHARS
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    llm: LlmConfig | None = None
    mock_script: MockScript | None = None
    attribution: bool = True
    template: PromptTemplate = field(default_factory=PromptTemplate)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class BuildStats:
    documents: int
    rejected: int
    chunks: int
    dim: int


@dataclass
class IndexBundle:
    """A searchable index with its chunk texts, documents, and metadata."""

    index: VectorIndex
    chunks: ChunkStore
    docs: dict[str, Document]
    meta: dict

    def document_for_chunk(self, chunk_id: str) -> Document | None:
        chunk = self.chunks.get(chunk_id)
        return self.docs.get(chunk.doc_ref) if chunk else None


@dataclass
class Answer:
    """Everything one query produced, intermediates included, for audit."""

    question: str
    events: list[PoliticalEvent]
    invalid: list[tuple[object, list[str]]]
    hits: list[RetrievalHit]
    raw_text: str
    timings: dict[str, float]
    warning: str | None = None


def _embedder_meta(config: EmbedderConfig) -> dict:
    return {"kind": config.kind, "dim": config.dim, "model": config.model}


def _atomic_write_text(path: Path, text: str) -> None:
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def build(
    corpus_path: Union[str, Path],
    out_dir: Union[str, Path, None],
    config: EngineConfig,
    corpus_cfg: CorpusConfig | None = None,
) -> tuple[IndexBundle, BuildStats]:
    """Ingest the corpus, embed every chunk, and assemble (and persist) the index.

    With out_dir set, the four artifacts are written atomically; a failed
    build leaves no partial outputs behind. Raises EmptyCorpusError when
    parsing or filtering leaves nothing to index.
    """
    ccfg = corpus_cfg if corpus_cfg is not None else CorpusConfig()
    records, line_rejects = parse_jsonl(corpus_path, ccfg.field_map)
    docs, record_rejects = normalize_filter(records, ccfg.filter)
    if not docs:
        raise EmptyCorpusError("no documents survived the corpus filter")
    chunks = chunk_documents(docs, ccfg.chunk)

    vectors = embed_texts([c.text for c in chunks], config.embedder)
    index = VectorIndex(dim=config.embedder.dim)
    for chunk, vector in zip(chunks, vectors):
        index.upsert(chunk.chunk_id, vector)

    bundle = IndexBundle(
        index=index,
        chunks=ChunkStore(chunks),
        docs={d.doc_id: d for d in docs},
        meta={"version": META_VERSION, "embedder": _embedder_meta(config.embedder)},
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        index.save(out / INDEX_FILE)
        bundle.chunks.save(out / CHUNKS_FILE)
        save_documents(docs, out / DOCS_FILE)
        _atomic_write_text(out / META_FILE, json.dumps(bundle.meta, sort_keys=True) + "\n")

    stats = BuildStats(
        documents=len(docs),
        rejected=len(line_rejects) + len(record_rejects),
        chunks=len(chunks),
        dim=index.dim or 0,
    )
    return bundle, stats


def load_bundle(index_dir: Union[str, Path]) -> IndexBundle:
    """Load a previously built index directory."""
    directory = Path(index_dir)
    index = VectorIndex.load(directory / INDEX_FILE)
    chunks = ChunkStore.load(directory / CHUNKS_FILE)
    docs = {d.doc_id: d for d in load_documents(directory / DOCS_FILE)}
    meta = json.loads((directory / META_FILE).read_text(encoding="utf-8"))
    return IndexBundle(index=index, chunks=chunks, docs=docs, meta=meta)


def _check_embedder(bundle: IndexBundle, config: EngineConfig) -> None:
    recorded = bundle.meta.get("embedder", {})
    wanted = _embedder_meta(config.embedder)
    if recorded.get("kind") != wanted["kind"] or recorded.get("dim") != wanted["dim"]:
        raise EmbedderMismatchError(
            f"index built with embedder {recorded}, query configured for {wanted}"
        )


def refresh_bundle(bundle: IndexBundle, replacement: IndexBundle) -> IndexBundle:
    """Whole-corpus replacement: a new bundle whose index generation advances."""
    return IndexBundle(
        index=bundle.index.refresh(replacement.index.entries()),
        chunks=replacement.chunks,
        docs=replacement.docs,
        meta=replacement.meta,
    )


def answer_query(question: str, bundle: IndexBundle, config: EngineConfig) -> Answer:
    """Run one question through retrieve -> prompt -> complete -> parse -> attribute.

    A parse failure is surfaced in the Answer (empty events, warning set),
    not raised; transport errors propagate to the caller.
    """
    if not question.strip():
        raise ValueError("question must be non-empty")
    if len(bundle.index) == 0:
        raise QueryOnEmptyIndexError("cannot query an empty index")
    _check_embedder(bundle, config)

    timings: dict[str, float] = {}
    start = time.perf_counter()
    query_vector = embed_texts([question], config.embedder)[0]
    timings["embed_s"] = time.perf_counter() - start

    start = time.perf_counter()
    hits = bundle.index.search(query_vector, config.k, bundle.chunks)
    timings["search_s"] = time.perf_counter() - start

    prompt = render(config.template, question, hits, config.budget_chars)

    start = time.perf_counter()
    if config.mock_script is not None:
        response = mock_complete(prompt, config.mock_script)
    elif config.llm is not None:
        response = complete(prompt, config.llm)
    else:
        raise ValueError("EngineConfig needs either an llm config or a mock script")
    timings["llm_s"] = time.perf_counter() - start

    start = time.perf_counter()
    warning = None
    try:
        result = parse_events(response.text)
        included = [hit for hit in hits if hit.chunk_id in prompt.context_ids]
        if config.attribution:
            result = attach_sources(result, included, require_sources=True)
    except EventParseError as exc:
        warning = f"unparseable LLM output: {exc}"
        result = parse_events("[]")
        result.raw_text = response.text
    timings["parse_s"] = time.perf_counter() - start

    return Answer(
        question=question,
        events=result.events,
        invalid=result.invalid,
        hits=hits,
        raw_text=response.text,
        timings=timings,
        warning=warning,
    )
