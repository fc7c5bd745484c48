"""Text embeddings: a deterministic local hashed-feature embedder, a client
for an OpenAI-compatible remote embeddings endpoint, and cosine similarity.

The local embedder hashes unigrams and adjacent bigrams with FNV-1a 64
into a fixed number of buckets, weighs each feature 1 + ln(count), and
L2-normalizes. It is dependency-free on the model side, bit-stable across
platforms, and good enough for keyword-style retrieval over headlines.
"""

from __future__ import annotations

import math
import os
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np
import requests

from .errors import (
    DimMismatchError,
    EmptyTextError,
    EndpointError,
    ProtocolError,
    TransportError,
)

DEFAULT_DIM = 1024
NORM_TOLERANCE = 1e-6

API_KEY_ENV = "POLEVENT_API_KEY"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

# Unicode alphanumeric runs (word chars minus underscore).
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class EmbeddingVector:
    """Unit-norm dense float32 vector.

    Construction enforces the unit-norm invariant; use normalized() to
    build one from arbitrary values. The backing array is read-only.
    """

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray):
        arr = np.asarray(values, dtype=np.float32)
        if arr.ndim != 1:
            raise ValueError("embedding values must be one-dimensional")
        norm = float(np.linalg.norm(arr.astype(np.float64)))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ValueError(f"embedding is not unit-norm (|v| = {norm!r})")
        arr = arr.copy()
        arr.flags.writeable = False
        self.values = arr

    @classmethod
    def normalized(cls, values) -> "EmbeddingVector":
        arr = np.asarray(values, dtype=np.float64)
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls((arr / norm).astype(np.float32))

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))

    def __repr__(self) -> str:
        return f"EmbeddingVector(dim={self.dim})"


@dataclass
class EmbedderConfig:
    """Which embedder to use: the local hashed one or a remote endpoint."""

    kind: str = "local"  # "local" | "remote"
    dim: int = DEFAULT_DIM
    endpoint: str | None = None
    model: str | None = None
    timeout: float = 30.0
    api_key_env: str = API_KEY_ENV

    def __post_init__(self):
        if self.kind not in ("local", "remote"):
            raise ValueError(f"unknown embedder kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote embedder requires an endpoint")


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric characters, dropping empties."""
    return _TOKEN_RE.findall(text.lower())


def features(tokens: list[str]) -> Counter:
    """All unigrams plus adjacent bigrams (bigrams joined with a space)."""
    feats = Counter(tokens)
    feats.update(f"{a} {b}" for a, b in zip(tokens, tokens[1:]))
    return feats


def embed_local(text: str, dim: int = DEFAULT_DIM) -> EmbeddingVector:
    """Embed text with the hashed bag-of-features scheme.

    Deterministic across runs and platforms: same text, same vector,
    bit for bit. Raises EmptyTextError when tokenization yields nothing.
    """
    tokens = tokenize(text)
    if not tokens:
        raise EmptyTextError(f"no tokens in text: {text!r}")
    buckets = np.zeros(dim, dtype=np.float64)
    for feat, count in features(tokens).items():
        bucket = fnv1a64(feat.encode("utf-8")) % dim
        buckets[bucket] += 1.0 + math.log(count)
    return EmbeddingVector.normalized(buckets)


def embed_remote(texts: list[str], config: EmbedderConfig) -> list[EmbeddingVector]:
    """Fetch embeddings from an OpenAI-compatible /v1/embeddings endpoint.

    Returns one vector per input text in input order, re-normalized locally
    because endpoints disagree on whether they normalize.
    """
    if config.kind != "remote":
        raise ValueError("embed_remote requires a remote EmbedderConfig")
    url = config.endpoint.rstrip("/") + "/v1/embeddings"
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(config.api_key_env, "")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    try:
        resp = requests.post(
            url,
            json={"model": config.model or "", "input": list(texts)},
            headers=headers,
            timeout=config.timeout,
        )
    except requests.RequestException as exc:
        raise TransportError(f"embeddings request failed: {type(exc).__name__}") from exc
    if resp.status_code != 200:
        raise EndpointError(resp.status_code, resp.text[:200])
    try:
        payload = resp.json()
        rows = payload["data"]
        ordered = sorted(rows, key=lambda row: row["index"])
        vectors = [EmbeddingVector.normalized(row["embedding"]) for row in ordered]
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed embeddings response: {exc}") from exc
    if len(vectors) != len(texts):
        raise ProtocolError(f"asked for {len(texts)} embeddings, got {len(vectors)}")
    return vectors


def embed_texts(texts: list[str], config: EmbedderConfig) -> list[EmbeddingVector]:
    """Embed a batch with whichever embedder the config selects."""
    if config.kind == "local":
        return [embed_local(t, config.dim) for t in texts]
    return embed_remote(texts, config)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity of two unit vectors, clamped to [-1, 1]."""
    if a.dim != b.dim:
        raise DimMismatchError(f"dim {a.dim} vs {b.dim}")
    score = float(np.dot(a.values.astype(np.float64), b.values.astype(np.float64)))
    return max(-1.0, min(1.0, score))
