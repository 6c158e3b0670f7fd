"""Text embedders: a deterministic hashed bag-of-words and a remote HTTP client.

The hashed bag-of-words embedder is the corpus-free reference model: it is
reproducible across processes (keyed blake2b, no Python hash randomization)
and token overlap between texts maps directly to dot-product similarity.
The remote client speaks a minimal POST /embed protocol for real encoders.
"""

from __future__ import annotations

import hashlib
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import requests

from .errors import EmbeddingError, EmbeddingServiceError

# Embeddings are plain float64 numpy vectors.
Embedding = np.ndarray

TOKEN_RE = re.compile(r"[a-z0-9]+")

REMOTE_BATCH_SIZE = 64
TOKEN_ENV_VAR = "BOOLSEARCH_EMBED_TOKEN"


@dataclass(frozen=True)
class EmbedderSpec:
    """Configuration identifying one embedder; hashing it fingerprints indexes."""

    kind: str = "hashed-bow"
    dim: int = 256
    normalize: bool = True
    seed: int = 0
    endpoint: str = ""

    def __post_init__(self):
        if self.kind not in ("hashed-bow", "remote"):
            raise EmbeddingError(f"unknown embedder kind {self.kind!r}")
        if self.dim < 8:
            raise EmbeddingError(f"embedder dim must be >= 8, got {self.dim}")
        if (self.kind == "remote") != bool(self.endpoint):
            raise EmbeddingError("endpoint must be set iff kind is 'remote'")

    def fingerprint(self) -> str:
        payload = f"{self.kind}|{self.dim}|{int(self.normalize)}|{self.seed}|{self.endpoint}"
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs."""
    return TOKEN_RE.findall(text.lower())


def _token_hash(token: str, seed: int) -> int:
    key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little")


def hashed_bow_embed(text: str, dim: int, seed: int = 0) -> Embedding:
    """Signed hashed bag-of-words vector, unnormalized.

    Each token's 64-bit keyed hash picks bucket = hash mod dim from the
    low end and the sign from the top bit (+1 if set, else -1), so the
    two choices stay decorrelated. Tokens accumulate, so the raw vector
    is additive over text concatenation and order-invariant.
    """
    if dim < 8:
        raise EmbeddingError(f"embedder dim must be >= 8, got {dim}")
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokenize(text):
        h = _token_hash(token, seed)
        bucket = h % dim
        sign = 1.0 if (h >> 63) & 1 else -1.0
        vec[bucket] += sign
    return vec


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Scale each row to unit Euclidean norm; zero rows stay zero."""
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return matrix / safe


def embed_texts(spec: EmbedderSpec, texts: list[str]) -> list[Embedding]:
    """Embed texts in order; every output vector has dimension spec.dim."""
    if spec.kind == "hashed-bow":
        vectors = [hashed_bow_embed(t, spec.dim, spec.seed) for t in texts]
    else:
        vectors = RemoteEmbedder(spec).embed(texts)
    if spec.normalize:
        vectors = [v if not v.any() else v / np.linalg.norm(v) for v in vectors]
    return vectors


class RemoteEmbedder:
    """Client for a POST {endpoint}/embed service.

    Requests carry {"texts": [...]} bodies of at most REMOTE_BATCH_SIZE
    texts and expect {"vectors": [[...]]} back. Batches run on a bounded
    thread pool; each request is retried up to 3 times with exponential
    backoff. A bearer token is read from BOOLSEARCH_EMBED_TOKEN if set.
    """

    def __init__(
        self,
        spec: EmbedderSpec,
        max_concurrency: int = 4,
        timeout: float = 30.0,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
    ):
        if spec.kind != "remote":
            raise EmbeddingError("RemoteEmbedder requires a remote spec")
        self.spec = spec
        self.max_concurrency = max_concurrency
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base

    def embed(self, texts: list[str]) -> list[Embedding]:
        batches = [
            texts[i : i + REMOTE_BATCH_SIZE]
            for i in range(0, len(texts), REMOTE_BATCH_SIZE)
        ]
        if not batches:
            return []
        if len(batches) == 1:
            results = [self._embed_batch(batches[0])]
        else:
            with ThreadPoolExecutor(max_workers=self.max_concurrency) as pool:
                results = list(pool.map(self._embed_batch, batches))
        return [vec for batch in results for vec in batch]

    def _embed_batch(self, texts: list[str]) -> list[Embedding]:
        headers = {}
        token = os.environ.get(TOKEN_ENV_VAR)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        url = self.spec.endpoint.rstrip("/") + "/embed"
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                response = requests.post(
                    url, json={"texts": texts}, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = EmbeddingServiceError(f"embed request failed: {exc}")
                continue
            if response.status_code != 200:
                last_error = EmbeddingServiceError(
                    f"embed service returned HTTP {response.status_code}: "
                    f"{response.text[:200]}"
                )
                # 4xx other than 429 will not improve on retry
                if 400 <= response.status_code < 500 and response.status_code != 429:
                    raise last_error
                continue
            return self._parse_vectors(response, len(texts))
        raise last_error if last_error else EmbeddingServiceError("embed failed")

    def _parse_vectors(self, response, expected: int) -> list[Embedding]:
        try:
            payload = response.json()
            rows = payload["vectors"]
        except (ValueError, KeyError) as exc:
            raise EmbeddingServiceError(f"malformed embed response: {exc}") from None
        if len(rows) != expected:
            raise EmbeddingServiceError(
                f"embed service returned {len(rows)} vectors for {expected} texts"
            )
        vectors = []
        for row in rows:
            vec = np.asarray(row, dtype=np.float64)
            if vec.shape != (self.spec.dim,):
                raise EmbeddingServiceError(
                    f"embed service returned dimension {vec.shape}, "
                    f"expected ({self.spec.dim},)"
                )
            if not np.all(np.isfinite(vec)):
                raise EmbeddingServiceError("embed service returned non-finite values")
            vectors.append(vec)
        return vectors
