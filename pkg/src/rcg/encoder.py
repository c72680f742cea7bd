"""Code encoders producing comparable vector embeddings.

Every encoder L2-normalizes its output, so the inner product of two
embeddings equals their cosine similarity. Embeddings carry the
fingerprint of the encoder that produced them; only embeddings with
matching fingerprints are comparable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._http import TransportError, request_json
from .corpus import Corpus, ReviewExample
from .errors import (
    DimensionMismatch,
    EmptyCorpus,
    EncoderUnavailable,
    FreeTextUnsupported,
    MalformedRecord,
    MissingVector,
    ProtocolViolation,
)
from .tokenizer import tokenize

DENSE = "dense"
SPARSE = "sparse"


@dataclass(frozen=True)
class EncoderDescriptor:
    name: str
    dimension: int
    normalizes: bool
    fingerprint: str


@dataclass(eq=False)
class Embedding:
    kind: str
    fingerprint: str
    dense: np.ndarray | None = None
    sparse: dict[int, float] | None = None
    norm: float = 0.0


def dense_embedding(values: Sequence[float], fingerprint: str, normalize: bool = True) -> Embedding:
    vec = np.asarray(values, dtype=np.float32)
    if vec.ndim != 1:
        raise DimensionMismatch(f"expected a flat vector, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("embedding has non-finite components")
    if normalize:
        norm = float(np.linalg.norm(vec.astype(np.float64)))
        if norm > 0.0:
            vec = (vec.astype(np.float64) / norm).astype(np.float32)
    stored_norm = float(np.linalg.norm(vec.astype(np.float64)))
    return Embedding(kind=DENSE, fingerprint=fingerprint, dense=vec, norm=stored_norm)


def sparse_embedding(weights: dict[int, float], fingerprint: str, normalize: bool = True) -> Embedding:
    if any(not math.isfinite(w) for w in weights.values()):
        raise ValueError("embedding has non-finite components")
    weights = {i: w for i, w in weights.items() if w != 0.0}
    if normalize and weights:
        norm = math.sqrt(sum(float(w) ** 2 for w in weights.values()))
        weights = {i: w / norm for i, w in weights.items()}
    quantized = {i: float(np.float32(w)) for i, w in sorted(weights.items())}
    stored_norm = math.sqrt(sum(w**2 for w in quantized.values()))
    return Embedding(kind=SPARSE, fingerprint=fingerprint, sparse=quantized, norm=stored_norm)


def inner_product(a: Embedding, b: Embedding) -> float:
    """Inner product accumulated in 64-bit, rounded to 32-bit."""
    if a.kind != b.kind:
        raise DimensionMismatch(f"cannot compare {a.kind} with {b.kind} embeddings")
    if a.kind == DENSE:
        if a.dense.shape != b.dense.shape:
            raise DimensionMismatch(f"dimension {a.dense.shape[0]} vs {b.dense.shape[0]}")
        total = float(np.dot(a.dense.astype(np.float64), b.dense.astype(np.float64)))
    else:
        total = 0.0
        for idx in sorted(a.sparse.keys() & b.sparse.keys()):
            total += a.sparse[idx] * b.sparse[idx]
    return float(np.float32(total))


class _TextEncoder:
    """Shared behavior for encoders that embed raw code text."""

    descriptor: EncoderDescriptor

    def encode_batch(self, texts: Sequence[str]) -> list[Embedding]:
        raise NotImplementedError

    def encode_example(self, example: ReviewExample) -> Embedding:
        return self.encode_batch([example.code])[0]

    def encode_examples(self, examples: Sequence[ReviewExample]) -> list[Embedding]:
        return self.encode_batch([ex.code for ex in examples])


class BowEncoder(_TextEncoder):
    """Bag-of-words term-frequency encoder over a fixed code vocabulary.

    Out-of-vocabulary tokens are dropped; an all-OOV text yields a legal
    zero-norm embedding.
    """

    def __init__(self, vocabulary: dict[str, int], fingerprint: str):
        self._vocabulary = vocabulary
        self.descriptor = EncoderDescriptor(
            name="bow",
            dimension=len(vocabulary),
            normalizes=True,
            fingerprint=fingerprint,
        )

    @property
    def vocabulary(self) -> dict[str, int]:
        return self._vocabulary

    def encode_batch(self, texts: Sequence[str]) -> list[Embedding]:
        out = []
        for text in texts:
            weights: dict[int, float] = {}
            for token in tokenize(text):
                idx = self._vocabulary.get(token)
                if idx is not None:
                    weights[idx] = weights.get(idx, 0.0) + 1.0
            out.append(sparse_embedding(weights, self.descriptor.fingerprint))
        return out


def build_bow_encoder(corpus: Corpus) -> BowEncoder:
    """Vocabulary in first-occurrence order over the corpus code field."""
    if len(corpus) == 0:
        raise EmptyCorpus("cannot build a bag-of-words encoder from an empty corpus")
    vocabulary: dict[str, int] = {}
    for ex in corpus:
        for token in tokenize(ex.code):
            if token not in vocabulary:
                vocabulary[token] = len(vocabulary)
    digest = hashlib.sha256()
    digest.update(b"bow\x00")
    for token in vocabulary:
        digest.update(token.encode("utf-8") + b"\x1f")
    digest.update(b"\x00")
    for ex in corpus:
        digest.update(ex.id.encode("utf-8") + b"\x1f")
    return BowEncoder(vocabulary, digest.hexdigest())


class PrecomputedEncoder:
    """Resolves ids to vectors computed offline; free text is unsupported."""

    def __init__(self, vectors: dict[str, Embedding], descriptor: EncoderDescriptor):
        self._vectors = vectors
        self.descriptor = descriptor

    def encode_batch(self, texts: Sequence[str]) -> list[Embedding]:
        raise FreeTextUnsupported(
            "precomputed encoders look vectors up by id; they cannot embed free text"
        )

    def encode_example(self, example: ReviewExample) -> Embedding:
        emb = self._vectors.get(example.id)
        if emb is None:
            raise MissingVector(f"no precomputed vector for id {example.id!r}")
        return emb

    def encode_examples(self, examples: Sequence[ReviewExample]) -> list[Embedding]:
        return [self.encode_example(ex) for ex in examples]


def load_precomputed_encoder(path: str | Path) -> PrecomputedEncoder:
    """Load id -> vector JSONL; vectors are L2-normalized on load."""
    path = Path(path)
    raw = path.read_bytes()
    fingerprint = "precomputed-" + hashlib.sha256(raw).hexdigest()
    vectors: dict[str, Embedding] = {}
    dimension: int | None = None
    for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            vector_id = str(record["id"])
            values = record["vector"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MalformedRecord(f"{path}:{lineno}: bad vector record ({exc})") from exc
        if dimension is None:
            dimension = len(values)
        elif len(values) != dimension:
            raise DimensionMismatch(
                f"{path}:{lineno}: vector has {len(values)} dims, expected {dimension}"
            )
        if vector_id in vectors:
            raise MalformedRecord(f"{path}:{lineno}: duplicate vector id {vector_id!r}")
        try:
            vectors[vector_id] = dense_embedding(values, fingerprint)
        except ValueError as exc:
            raise MalformedRecord(f"{path}:{lineno}: {exc}") from exc
    if dimension is None:
        raise MalformedRecord(f"{path}: no vectors found")
    descriptor = EncoderDescriptor(
        name="precomputed",
        dimension=dimension,
        normalizes=True,
        fingerprint=fingerprint,
    )
    return PrecomputedEncoder(vectors, descriptor)


class RemoteEncoder(_TextEncoder):
    """Client for a sidecar /embed endpoint; normalizes responses locally."""

    def __init__(self, endpoint: str, batch_size: int = 64, timeout: float = 30.0):
        self._endpoint = endpoint.rstrip("/")
        self._batch_size = batch_size
        self._timeout = timeout
        try:
            health = request_json("GET", self._endpoint + "/health", timeout=timeout)
        except TransportError as exc:
            raise EncoderUnavailable(
                f"encoder sidecar at {endpoint} unavailable: {exc}", status=exc.status
            ) from exc
        try:
            dimension = int(health["dimension"])
            model = str(health["embed_model"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolViolation(f"malformed /health response: {health!r}") from exc
        fingerprint = "remote-" + hashlib.sha256(
            f"{model}\x00{dimension}".encode("utf-8")
        ).hexdigest()
        self.descriptor = EncoderDescriptor(
            name=f"remote:{model}",
            dimension=dimension,
            normalizes=True,
            fingerprint=fingerprint,
        )

    def encode_batch(self, texts: Sequence[str]) -> list[Embedding]:
        out: list[Embedding] = []
        for start in range(0, len(texts), self._batch_size):
            chunk = list(texts[start : start + self._batch_size])
            try:
                resp = request_json(
                    "POST",
                    self._endpoint + "/embed",
                    {"texts": chunk},
                    timeout=self._timeout,
                )
            except TransportError as exc:
                raise EncoderUnavailable(str(exc), status=exc.status) from exc
            vectors = resp.get("vectors") if isinstance(resp, dict) else None
            if not isinstance(vectors, list) or len(vectors) != len(chunk):
                raise ProtocolViolation(
                    f"/embed returned {0 if not isinstance(vectors, list) else len(vectors)} "
                    f"vectors for {len(chunk)} texts"
                )
            for values in vectors:
                if len(values) != self.descriptor.dimension:
                    raise ProtocolViolation(
                        f"/embed vector has {len(values)} dims, "
                        f"descriptor says {self.descriptor.dimension}"
                    )
                try:
                    out.append(dense_embedding(values, self.descriptor.fingerprint))
                except ValueError as exc:
                    raise ProtocolViolation(str(exc)) from exc
        return out


def remote_encoder(endpoint: str, batch_size: int = 64, timeout: float = 30.0) -> RemoteEncoder:
    return RemoteEncoder(endpoint, batch_size=batch_size, timeout=timeout)
