"""Exact top-k dense retrieval over an embedded corpus, with persistence.

Scoring is deliberately brute force: every query is compared against every
row, so retrieval quality depends only on the embedding and the similarity
function. Ties are always broken by ascending doc id for total determinism.

Index file layout (little-endian): magic "BDIX", u32 version, u8 similarity
(0=dot, 1=cosine), u32 dim, u64 row count, u32-length-prefixed embedder-spec
JSON, 16-byte fingerprint, u32-length-prefixed UTF-8 doc ids, then the
row-major float32 matrix.
"""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .data import Corpus
from .embed import EmbedderSpec, embed_texts, normalize_rows
from .errors import BoolSearchError, EmbeddingError, IndexFormatError

logger = logging.getLogger(__name__)

MAGIC = b"BDIX"
FORMAT_VERSION = 1
SIMILARITIES = ("dot", "cosine")

_BUILD_CHUNK = 1024


@dataclass(frozen=True)
class ScoredDoc:
    doc_id: str
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise BoolSearchError(f"non-finite score for doc {self.doc_id!r}")


class RankedList:
    """Ordered retrieval result: scores non-increasing, ids distinct,
    equal scores ordered by ascending doc id."""

    __slots__ = ("items",)

    def __init__(self, items: Iterable[ScoredDoc]):
        self.items = tuple(items)
        seen: set[str] = set()
        for i, item in enumerate(self.items):
            if item.doc_id in seen:
                raise BoolSearchError(f"duplicate doc id {item.doc_id!r} in ranked list")
            seen.add(item.doc_id)
            if i > 0:
                prev = self.items[i - 1]
                if item.score > prev.score:
                    raise BoolSearchError("ranked list scores must be non-increasing")
                if item.score == prev.score and item.doc_id < prev.doc_id:
                    raise BoolSearchError(
                        "ranked list ties must be ordered by ascending doc id"
                    )

    @classmethod
    def from_scores(cls, pairs: Iterable[tuple[str, float]]) -> "RankedList":
        """Sort (doc_id, score) pairs by descending score, breaking ties
        by ascending doc id."""
        ordered = sorted(pairs, key=lambda p: (-p[1], p[0]))
        return cls(ScoredDoc(doc_id, score) for doc_id, score in ordered)

    def truncate(self, k: int) -> "RankedList":
        return RankedList(self.items[:k])

    def doc_ids(self) -> tuple[str, ...]:
        return tuple(item.doc_id for item in self.items)

    def scores(self) -> dict[str, float]:
        return {item.doc_id: item.score for item in self.items}

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __eq__(self, other) -> bool:
        return isinstance(other, RankedList) and self.items == other.items

    def __hash__(self) -> int:
        return hash(self.items)

    def __repr__(self) -> str:
        return f"RankedList({list(self.items)!r})"


@dataclass(frozen=True)
class Index:
    """Embedded corpus matrix plus everything needed to score queries."""

    doc_ids: tuple[str, ...]
    matrix: np.ndarray  # float32, len(doc_ids) x dim
    similarity: str
    spec: EmbedderSpec
    fingerprint: str
    load_warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.similarity not in SIMILARITIES:
            raise BoolSearchError(f"unknown similarity {self.similarity!r}")
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.doc_ids):
            raise BoolSearchError("index matrix row count must match doc id count")
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise BoolSearchError("index doc ids must be distinct")

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Index)
            and self.doc_ids == other.doc_ids
            and self.similarity == other.similarity
            and self.spec == other.spec
            and self.fingerprint == other.fingerprint
            and self.matrix.dtype == other.matrix.dtype
            and np.array_equal(self.matrix, other.matrix)
        )


def build_index(
    corpus: Corpus, spec: EmbedderSpec, similarity: str = "cosine"
) -> Index:
    """Embed every passage once and assemble the scoring matrix.

    Cosine indexes store unit-normalized rows (zero rows stay zero).
    """
    if similarity not in SIMILARITIES:
        raise BoolSearchError(f"unknown similarity {similarity!r}")
    if len(corpus) == 0:
        raise BoolSearchError("cannot build an index over an empty corpus")
    ids = corpus.ids
    texts = corpus.texts
    rows = []
    for start in range(0, len(texts), _BUILD_CHUNK):
        chunk = list(texts[start : start + _BUILD_CHUNK])
        try:
            rows.extend(embed_texts(spec, chunk))
        except EmbeddingError as exc:
            last = min(start + _BUILD_CHUNK, len(texts)) - 1
            raise EmbeddingError(
                f"embedding failed for passages {ids[start]!r}..{ids[last]!r}: {exc}"
            ) from exc
    matrix = np.vstack(rows)
    if similarity == "cosine":
        matrix = normalize_rows(matrix)
    return Index(
        doc_ids=ids,
        matrix=matrix.astype(np.float32),
        similarity=similarity,
        spec=spec,
        fingerprint=spec.fingerprint(),
    )


def embed_query(index: Index, query: str) -> np.ndarray:
    vec = embed_texts(index.spec, [query])[0]
    if index.similarity == "cosine" and vec.any():
        vec = vec / np.linalg.norm(vec)
    return vec


def top_k(index: Index, query: str, k: int) -> RankedList:
    """Exact top-k by similarity; fewer than k returned iff the corpus
    is smaller than k."""
    if k < 1:
        raise BoolSearchError(f"k must be >= 1, got {k}")
    vec = embed_query(index, query)
    # elementwise multiply + pairwise sum, not BLAS matmul: the reduction
    # order is then identical to a per-row np.sum, keeping scores exactly
    # reproducible regardless of how many rows are scored at once
    scores = (index.matrix.astype(np.float64) * vec).sum(axis=1)
    ids = np.asarray(index.doc_ids)
    # lexsort: last key is primary, so descending score then ascending id
    order = np.lexsort((ids, -scores))[:k]
    return RankedList(
        ScoredDoc(str(ids[i]), float(scores[i])) for i in order
    )


def save_index(index: Index, path: str | Path) -> None:
    spec_json = json.dumps(
        {
            "kind": index.spec.kind,
            "dim": index.spec.dim,
            "normalize": index.spec.normalize,
            "seed": index.spec.seed,
            "endpoint": index.spec.endpoint,
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IBIQ", FORMAT_VERSION, SIMILARITIES.index(index.similarity),
                            index.dim, len(index.doc_ids)))
        f.write(struct.pack("<I", len(spec_json)))
        f.write(spec_json)
        f.write(index.fingerprint.encode("ascii")[:16].ljust(16, b"\0"))
        for doc_id in index.doc_ids:
            encoded = doc_id.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
        f.write(np.ascontiguousarray(index.matrix, dtype="<f4").tobytes())


def load_index(path: str | Path, expected_spec: EmbedderSpec | None = None) -> Index:
    """Read an index file back; bit-for-bit inverse of save_index.

    A fingerprint differing from expected_spec is not an error (the file
    is self-describing) but is surfaced in Index.load_warnings.
    """
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise IndexFormatError(f"{path}: not an index file (bad magic header)")
    try:
        version, sim_code, dim, count = struct.unpack_from("<IBIQ", data, 4)
        offset = 4 + struct.calcsize("<IBIQ")
        if version != FORMAT_VERSION:
            raise IndexFormatError(
                f"{path}: unsupported index version {version} "
                f"(expected {FORMAT_VERSION})"
            )
        if sim_code >= len(SIMILARITIES):
            raise IndexFormatError(f"{path}: unknown similarity code {sim_code}")
        (spec_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        spec_raw = json.loads(data[offset : offset + spec_len].decode("utf-8"))
        offset += spec_len
        fingerprint = data[offset : offset + 16].rstrip(b"\0").decode("ascii")
        offset += 16
        doc_ids = []
        for _ in range(count):
            (id_len,) = struct.unpack_from("<I", data, offset)
            offset += 4
            doc_ids.append(data[offset : offset + id_len].decode("utf-8"))
            offset += id_len
        expected_bytes = count * dim * 4
        blob = data[offset : offset + expected_bytes]
        if len(blob) != expected_bytes:
            raise IndexFormatError(f"{path}: truncated matrix payload")
        matrix = np.frombuffer(blob, dtype="<f4").reshape(count, dim).copy()
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IndexFormatError(f"{path}: corrupt index file: {exc}") from None
    spec = EmbedderSpec(**spec_raw)
    warnings: tuple[str, ...] = ()
    if expected_spec is not None and expected_spec.fingerprint() != fingerprint:
        message = (
            f"index fingerprint {fingerprint} does not match the configured "
            f"embedder spec ({expected_spec.fingerprint()}); "
            "queries will use the spec stored in the index"
        )
        logger.warning(message)
        warnings = (message,)
    return Index(
        doc_ids=tuple(doc_ids),
        matrix=matrix,
        similarity=SIMILARITIES[sim_code],
        spec=spec,
        fingerprint=fingerprint,
        load_warnings=warnings,
    )
