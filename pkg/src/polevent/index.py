"""Exact-scan vector index with binary on-disk persistence and atomic refresh.

Search is a full scan: at the corpus scales this system targets (thousands
of headline chunks) exactness is cheap, testable against a brute-force
oracle, and has no recall knob to tune. Ordering is total: score descending,
then chunk id ascending, so identical inputs give byte-identical hit lists.

File format (little-endian): magic "PEVI", version u16, dim u32, count u64,
then per entry id_len u16 + id bytes + dim float32 values, and a trailing
CRC32 over everything before it. Entries are written in sorted id order so
rebuilding the same corpus reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Union

import numpy as np

from .corpus import Chunk
from .embed import EmbeddingVector
from .errors import DimMismatchError, IndexFormatError

MAGIC = b"PEVI"
VERSION = 1

_HEADER = struct.Struct("<4sHIQ")
_ID_LEN = struct.Struct("<H")
_CRC = struct.Struct("<I")


@dataclass(frozen=True)
class RetrievalHit:
    """One search result: chunk id, cosine score, and the chunk text."""

    chunk_id: str
    score: float
    text: str = ""


class VectorIndex:
    """Maps chunk ids to unit-norm vectors; answers exact top-k cosine queries."""

    def __init__(self, dim: int | None = None):
        self.dim = dim
        self.generation = 0
        self._entries: dict[str, EmbeddingVector] = {}
        self._matrix: np.ndarray | None = None
        self._ids: list[str] | None = None

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._entries

    def get(self, chunk_id: str) -> EmbeddingVector | None:
        return self._entries.get(chunk_id)

    def ids(self) -> list[str]:
        return list(self._entries)

    def entries(self) -> dict[str, EmbeddingVector]:
        return dict(self._entries)

    def _check_dim(self, v: EmbeddingVector) -> None:
        if self.dim is None:
            self.dim = v.dim
        elif v.dim != self.dim:
            raise DimMismatchError(f"index dim {self.dim}, vector dim {v.dim}")

    def upsert(self, chunk_id: str, v: EmbeddingVector) -> None:
        """Insert or replace the vector stored under chunk_id."""
        self._check_dim(v)
        self._entries[chunk_id] = v
        self.generation += 1
        self._matrix = None

    def _scan_arrays(self) -> tuple[list[str], np.ndarray]:
        if self._matrix is None:
            self._ids = list(self._entries)
            if self._ids:
                self._matrix = np.stack(
                    [self._entries[i].values for i in self._ids]
                ).astype(np.float64)
            else:
                self._matrix = np.zeros((0, self.dim or 0), dtype=np.float64)
        return self._ids, self._matrix

    def search(
        self,
        q: EmbeddingVector,
        k: int,
        chunks: Mapping[str, Chunk] | None = None,
    ) -> list[RetrievalHit]:
        """Exact top-k by cosine. Hit texts are resolved through `chunks` when given.

        An empty index returns an empty list. Scores are clamped to [-1, 1];
        ties break on chunk id ascending.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if not self._entries:
            return []
        if q.dim != self.dim:
            raise DimMismatchError(f"index dim {self.dim}, query dim {q.dim}")
        ids, matrix = self._scan_arrays()
        scores = np.clip(matrix @ q.values.astype(np.float64), -1.0, 1.0)
        order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))[:k]
        hits = []
        for i in order:
            cid = ids[i]
            text = chunks[cid].text if chunks is not None and cid in chunks else ""
            hits.append(RetrievalHit(chunk_id=cid, score=float(scores[i]), text=text))
        return hits

    def save(self, path: Union[str, Path]) -> None:
        """Write the index atomically (temp file + rename), sorted by id."""
        path = Path(path)
        dim = self.dim if self.dim is not None else 0
        parts = [_HEADER.pack(MAGIC, VERSION, dim, len(self._entries))]
        for chunk_id in sorted(self._entries):
            id_bytes = chunk_id.encode("utf-8")
            if len(id_bytes) > 0xFFFF:
                raise ValueError(f"chunk id too long to persist: {chunk_id[:64]}...")
            parts.append(_ID_LEN.pack(len(id_bytes)))
            parts.append(id_bytes)
            parts.append(self._entries[chunk_id].values.astype("<f4").tobytes())
        body = b"".join(parts)
        blob = body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(blob)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise

    @classmethod
    def load(cls, path: Union[str, Path]) -> "VectorIndex":
        """Load an index; any truncation or corruption raises IndexFormatError."""
        blob = Path(path).read_bytes()
        if len(blob) < _HEADER.size + _CRC.size:
            raise IndexFormatError(f"file too short to be an index ({len(blob)} bytes)")
        body, trailer = blob[: -_CRC.size], blob[-_CRC.size :]
        if _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF) != trailer:
            raise IndexFormatError("checksum mismatch: file truncated or corrupted")
        magic, version, dim, count = _HEADER.unpack_from(body, 0)
        if magic != MAGIC:
            raise IndexFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise IndexFormatError(f"unsupported version {version}")
        index = cls(dim=dim if dim else None)
        offset = _HEADER.size
        vec_bytes = dim * 4
        for _ in range(count):
            if offset + _ID_LEN.size > len(body):
                raise IndexFormatError("entry header past end of file")
            (id_len,) = _ID_LEN.unpack_from(body, offset)
            offset += _ID_LEN.size
            if offset + id_len + vec_bytes > len(body):
                raise IndexFormatError("entry data past end of file")
            chunk_id = body[offset : offset + id_len].decode("utf-8")
            offset += id_len
            values = np.frombuffer(body[offset : offset + vec_bytes], dtype="<f4")
            offset += vec_bytes
            try:
                index.upsert(chunk_id, EmbeddingVector(values))
            except ValueError as exc:
                raise IndexFormatError(f"entry {chunk_id!r}: {exc}") from exc
        if offset != len(body):
            raise IndexFormatError(f"{len(body) - offset} trailing bytes after entries")
        return index

    def refresh(self, new_entries: Mapping[str, EmbeddingVector]) -> "VectorIndex":
        """Build a complete replacement index; the old one is left untouched.

        Readers holding the old index keep a consistent snapshot; the new
        index carries a strictly larger generation.
        """
        new = VectorIndex(dim=self.dim)
        for chunk_id, v in new_entries.items():
            new._check_dim(v)
            new._entries[chunk_id] = v
        new._matrix = None
        new.generation = self.generation + 1
        return new


class IndexHandle:
    """Shared handle readers go through; refresh swaps the whole index at once.

    CPython attribute assignment is atomic, so a reader sees either the old
    or the new index, never a mix.
    """

    def __init__(self, index: VectorIndex):
        self._index = index

    def get(self) -> VectorIndex:
        return self._index

    def swap(self, new_index: VectorIndex) -> VectorIndex:
        old = self._index
        self._index = new_index
        return old


class ChunkStore:
    """Chunk texts, persisted beside the index as JSON-lines."""

    def __init__(self, chunks: Iterable[Chunk] = ()):
        self._chunks: dict[str, Chunk] = {c.chunk_id: c for c in chunks}

    def __len__(self) -> int:
        return len(self._chunks)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._chunks

    def __getitem__(self, chunk_id: str) -> Chunk:
        return self._chunks[chunk_id]

    def get(self, chunk_id: str) -> Chunk | None:
        return self._chunks.get(chunk_id)

    def add(self, chunk: Chunk) -> None:
        self._chunks[chunk.chunk_id] = chunk

    def chunks(self) -> list[Chunk]:
        return list(self._chunks.values())

    def save(self, path: Union[str, Path]) -> None:
        lines = [
            json.dumps(
                {"chunk_id": c.chunk_id, "doc_ref": c.doc_ref, "text": c.text},
                ensure_ascii=False,
                sort_keys=True,
            )
            for c in sorted(self._chunks.values(), key=lambda c: c.chunk_id)
        ]
        path = Path(path)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + ("\n" if lines else ""))
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ChunkStore":
        store = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            store.add(Chunk(chunk_id=obj["chunk_id"], text=obj["text"], doc_ref=obj["doc_ref"]))
        return store
