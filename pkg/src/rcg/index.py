"""Retrieval database construction and exact top-k inner-product search.

Search is exact: scores are accumulated in 64-bit floats and rounded to
32-bit before ranking, and ties are broken by ascending entry id so
results are reproducible.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .corpus import Corpus, ReviewExample
from .encoder import DENSE, SPARSE, Embedding
from .errors import AlignmentError, DuplicateId, EncoderMismatch, MalformedRecord, ZeroQuery

logger = logging.getLogger(__name__)

INDEX_SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"
VECTORS_NAME = "vectors.jsonl"


class Exemplar(NamedTuple):
    id: str
    score: float
    code: str
    comment: str


@dataclass(frozen=True)
class RetrievalResult:
    query_id: str | None
    neighbors: tuple[tuple[str, float], ...]
    k_requested: int


class RetrievalDatabase:
    """Encoded corpus entries, order-preserving, ready for exact search."""

    def __init__(
        self,
        ids: Sequence[str],
        codes: Sequence[str],
        comments: Sequence[str],
        embeddings: Sequence[Embedding],
        fingerprint: str,
    ):
        if not (len(ids) == len(codes) == len(comments) == len(embeddings)):
            raise AlignmentError("ids, codes, comments, and embeddings must align")
        if len(set(ids)) != len(ids):
            raise DuplicateId("database entry ids must be unique")
        kinds = {e.kind for e in embeddings}
        if len(kinds) > 1:
            raise EncoderMismatch(f"mixed embedding kinds in database: {sorted(kinds)}")
        bad = [i for e, i in zip(embeddings, ids) if e.fingerprint != fingerprint]
        if bad:
            raise EncoderMismatch(f"entries {bad[:3]} were produced by a different encoder")
        self.ids = tuple(ids)
        self.codes = tuple(codes)
        self.comments = tuple(comments)
        self.embeddings = tuple(embeddings)
        self.fingerprint = fingerprint
        self.kind = kinds.pop() if kinds else DENSE
        self.zero_norm_ids = tuple(i for i, e in zip(self.ids, embeddings) if e.norm == 0.0)
        self._ids_arr = np.array(self.ids)
        self._by_id = {entry_id: pos for pos, entry_id in enumerate(self.ids)}
        if self.kind == DENSE:
            self.dimension = int(self.embeddings[0].dense.shape[0]) if self.embeddings else 0
            self._matrix64 = (
                np.stack([e.dense for e in self.embeddings]).astype(np.float64)
                if self.embeddings
                else np.zeros((0, 0))
            )
        else:
            self.dimension = max(
                (max(e.sparse.keys(), default=-1) for e in self.embeddings), default=-1
            ) + 1
            postings: dict[int, tuple[list[int], list[float]]] = {}
            for row, emb in enumerate(self.embeddings):
                for idx, weight in emb.sparse.items():
                    rows, weights = postings.setdefault(idx, ([], []))
                    rows.append(row)
                    weights.append(weight)
            self._postings = {
                idx: (np.array(rows, dtype=np.intp), np.array(weights, dtype=np.float64))
                for idx, (rows, weights) in postings.items()
            }

    @property
    def size(self) -> int:
        return len(self.ids)

    def __len__(self) -> int:
        return len(self.ids)

    def position(self, entry_id: str) -> int:
        return self._by_id[entry_id]

    def resolve(self, result: RetrievalResult) -> list[Exemplar]:
        """Expand a ranking into (id, score, code, comment) exemplars."""
        out = []
        for entry_id, score in result.neighbors:
            pos = self._by_id[entry_id]
            out.append(Exemplar(entry_id, score, self.codes[pos], self.comments[pos]))
        return out

    def _scores_f32(self, query: Embedding) -> np.ndarray:
        if self.kind == DENSE:
            scores = self._matrix64 @ query.dense.astype(np.float64)
        else:
            scores = np.zeros(len(self.ids), dtype=np.float64)
            for idx in sorted(query.sparse.keys()):
                hit = self._postings.get(idx)
                if hit is not None:
                    rows, weights = hit
                    scores[rows] += query.sparse[idx] * weights
        return scores.astype(np.float32)


def build_index(corpus: Corpus, encoder) -> RetrievalDatabase:
    """One entry per corpus example, encoded in corpus order."""
    embeddings = encoder.encode_examples(corpus.examples)
    db = RetrievalDatabase(
        ids=[ex.id for ex in corpus],
        codes=[ex.code for ex in corpus],
        comments=[ex.comment for ex in corpus],
        embeddings=embeddings,
        fingerprint=encoder.descriptor.fingerprint,
    )
    for entry_id in db.zero_norm_ids:
        logger.warning("entry %s has a zero-norm embedding; it can never be retrieved", entry_id)
    return db


def retrieve(
    db: RetrievalDatabase,
    query: Embedding,
    k: int,
    exclude_ids: Iterable[str] = (),
    exclude_identical_code: str | None = None,
    query_id: str | None = None,
) -> RetrievalResult:
    """Top-k entries by inner product, ties broken by ascending id."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if query.fingerprint != db.fingerprint:
        raise EncoderMismatch(
            f"query fingerprint {query.fingerprint[:12]}... does not match "
            f"database fingerprint {db.fingerprint[:12]}..."
        )
    if query.norm == 0.0:
        raise ZeroQuery("query embedding has zero norm")
    exclude_ids = set(exclude_ids)
    scores = db._scores_f32(query)
    if exclude_ids or exclude_identical_code is not None:
        eligible = np.array(
            [
                entry_id not in exclude_ids
                and (exclude_identical_code is None or code != exclude_identical_code)
                for entry_id, code in zip(db.ids, db.codes)
            ],
            dtype=bool,
        )
        positions = np.nonzero(eligible)[0]
    else:
        positions = np.arange(len(db.ids))
    order = np.lexsort((db._ids_arr[positions], -scores[positions]))
    top = positions[order[: min(k, len(positions))]]
    neighbors = tuple((db.ids[i], float(scores[i])) for i in top)
    return RetrievalResult(query_id=query_id, neighbors=neighbors, k_requested=k)


def retrieve_for_training(
    db: RetrievalDatabase,
    example: ReviewExample,
    encoder,
    k: int,
) -> RetrievalResult:
    """Training-time retrieval: the example itself and any byte-identical
    code are excluded so the generator never sees its own target."""
    if example.id not in db._by_id:
        raise ValueError(f"example {example.id!r} is not a member of this database")
    query = encoder.encode_example(example)
    return retrieve(
        db,
        query,
        k,
        exclude_ids={example.id},
        exclude_identical_code=example.code,
        query_id=example.id,
    )


def lowest_id_entries(
    db: RetrievalDatabase,
    k: int,
    exclude_ids: Iterable[str] = (),
    exclude_identical_code: str | None = None,
    query_id: str | None = None,
) -> RetrievalResult:
    """Zero-query fallback: the k lowest-id eligible entries with score 0."""
    exclude_ids = set(exclude_ids)
    chosen = sorted(
        entry_id
        for entry_id, code in zip(db.ids, db.codes)
        if entry_id not in exclude_ids
        and (exclude_identical_code is None or code != exclude_identical_code)
    )[: max(k, 0)]
    return RetrievalResult(
        query_id=query_id,
        neighbors=tuple((entry_id, 0.0) for entry_id in chosen),
        k_requested=k,
    )


def save_index(db: RetrievalDatabase, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": INDEX_SCHEMA_VERSION,
        "fingerprint": db.fingerprint,
        "size": db.size,
        "dimension": db.dimension,
        "kind": db.kind,
    }
    (directory / MANIFEST_NAME).write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    with open(directory / VECTORS_NAME, "w", encoding="utf-8") as fh:
        for entry_id, emb in zip(db.ids, db.embeddings):
            if db.kind == DENSE:
                vector = [float(x) for x in emb.dense]
            else:
                vector = {str(idx): weight for idx, weight in emb.sparse.items()}
            fh.write(
                json.dumps({"id": entry_id, "vector": vector}, sort_keys=True,
                           separators=(",", ":"))
                + "\n"
            )


def load_index(directory: str | Path, corpus: Corpus) -> RetrievalDatabase:
    """Reload a serialized index, rejoining code/comment columns by id.

    Stored vectors are restored bit-for-bit (no renormalization), so
    save -> load -> save round-trips to identical bytes.
    """
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST_NAME).read_text(encoding="utf-8"))
    kind = manifest["kind"]
    fingerprint = manifest["fingerprint"]
    ids, codes, comments, embeddings = [], [], [], []
    with open(directory / VECTORS_NAME, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            entry_id = str(record["id"])
            if entry_id not in corpus:
                raise AlignmentError(
                    f"{directory / VECTORS_NAME}:{lineno}: id {entry_id!r} not in corpus"
                )
            example = corpus.get(entry_id)
            vector = record["vector"]
            if kind == DENSE:
                emb = Embedding(
                    kind=DENSE,
                    fingerprint=fingerprint,
                    dense=np.asarray(vector, dtype=np.float32),
                )
                emb.norm = float(np.linalg.norm(emb.dense.astype(np.float64)))
            elif kind == SPARSE:
                weights = {int(idx): float(w) for idx, w in vector.items()}
                emb = Embedding(kind=SPARSE, fingerprint=fingerprint, sparse=weights)
                emb.norm = float(np.sqrt(sum(w**2 for w in weights.values())))
            else:
                raise MalformedRecord(f"unknown embedding kind {kind!r} in manifest")
            ids.append(entry_id)
            codes.append(example.code)
            comments.append(example.comment)
            embeddings.append(emb)
    if len(ids) != manifest["size"]:
        raise AlignmentError(
            f"manifest says {manifest['size']} entries, vectors file has {len(ids)}"
        )
    return RetrievalDatabase(ids, codes, comments, embeddings, fingerprint)
