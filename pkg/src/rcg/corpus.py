"""Dataset loading, validation, and training-corpus token frequency statistics."""

from __future__ import annotations

import json
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

from .errors import (
    AlignmentError,
    DuplicateId,
    EmptyCorpus,
    InvalidThresholds,
    MalformedRecord,
)
from .tokenizer import tokenize

SPLITS = ("train", "valid", "test")
FIELDS = ("comment", "code")


@dataclass(frozen=True)
class ReviewExample:
    """One code snippet paired with its ground-truth review comment."""

    id: str
    code: str
    comment: str
    split: str


class Corpus:
    """Ordered, immutable collection of review examples with an id index.

    Iteration order is load order and is stable across runs.
    """

    def __init__(self, examples: Iterable[ReviewExample]):
        examples = tuple(examples)
        index: dict[str, int] = {}
        for pos, ex in enumerate(examples):
            _validate_example(ex, where=f"example at position {pos}")
            if ex.id in index:
                raise DuplicateId(f"duplicate id {ex.id!r}")
            index[ex.id] = pos
        self._examples = examples
        self._index = index

    @property
    def examples(self) -> tuple[ReviewExample, ...]:
        return self._examples

    @property
    def size(self) -> int:
        return len(self._examples)

    def __len__(self) -> int:
        return len(self._examples)

    def __iter__(self) -> Iterator[ReviewExample]:
        return iter(self._examples)

    def __getitem__(self, position: int) -> ReviewExample:
        return self._examples[position]

    def __contains__(self, example_id: str) -> bool:
        return example_id in self._index

    def get(self, example_id: str) -> ReviewExample:
        return self._examples[self._index[example_id]]

    def position(self, example_id: str) -> int:
        return self._index[example_id]


def _validate_example(ex: ReviewExample, where: str) -> None:
    if not ex.id:
        raise MalformedRecord(f"{where}: empty id")
    if not ex.code.strip():
        raise MalformedRecord(f"{where}: empty code")
    if not ex.comment.strip():
        raise MalformedRecord(f"{where}: empty comment")
    if ex.split not in SPLITS:
        raise MalformedRecord(f"{where}: unknown split {ex.split!r}")


def load_corpus(
    path: str | Path,
    format: str = "jsonl",
    *,
    comment_path: str | Path | None = None,
    split: str = "train",
) -> Corpus:
    """Load a corpus from disk.

    ``jsonl``: one object per line with keys id/code/comment/split.
    ``paired_text``: two line-aligned files; ``path`` holds code lines,
    ``comment_path`` the comments, ids are zero-padded line numbers and
    every record gets the ``split`` given here.
    """
    if format == "jsonl":
        return _load_jsonl(Path(path))
    if format == "paired_text":
        if comment_path is None:
            raise MalformedRecord("paired_text format needs a comment_path")
        return _load_paired(Path(path), Path(comment_path), split)
    raise MalformedRecord(f"unknown corpus format {format!r}")


def _load_jsonl(path: Path) -> Corpus:
    examples = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            try:
                ex = ReviewExample(
                    id=str(record["id"]),
                    code=str(record["code"]),
                    comment=str(record["comment"]),
                    split=str(record["split"]),
                )
            except KeyError as exc:
                raise MalformedRecord(f"{path}:{lineno}: missing field {exc}") from exc
            _validate_example(ex, where=f"{path}:{lineno}")
            if ex.id in seen:
                raise DuplicateId(f"{path}:{lineno}: duplicate id {ex.id!r}")
            seen.add(ex.id)
            examples.append(ex)
    return Corpus(examples)


def _load_paired(code_path: Path, comment_path: Path, split: str) -> Corpus:
    code_lines = code_path.read_text(encoding="utf-8").splitlines()
    comment_lines = comment_path.read_text(encoding="utf-8").splitlines()
    if len(code_lines) != len(comment_lines):
        raise AlignmentError(
            f"{code_path} has {len(code_lines)} lines but "
            f"{comment_path} has {len(comment_lines)}"
        )
    width = max(6, len(str(max(len(code_lines) - 1, 0))))
    examples = []
    for lineno, (code, comment) in enumerate(zip(code_lines, comment_lines)):
        ex = ReviewExample(id=str(lineno).zfill(width), code=code, comment=comment, split=split)
        _validate_example(ex, where=f"{code_path}:{lineno + 1}")
        examples.append(ex)
    return Corpus(examples)


@dataclass(frozen=True)
class FrequencyTable:
    """Token -> occurrence count over one field of a corpus (multiset counts)."""

    counts: dict[str, int]
    total_tokens: int
    unique_tokens: int


def build_frequency_table(corpus: Corpus, field: str = "comment") -> FrequencyTable:
    if field not in FIELDS:
        raise MalformedRecord(f"unknown field {field!r}")
    if len(corpus) == 0:
        raise EmptyCorpus("cannot build a frequency table from an empty corpus")
    counts: Counter[str] = Counter()
    for ex in corpus:
        counts.update(tokenize(getattr(ex, field)))
    return FrequencyTable(
        counts=dict(counts),
        total_tokens=sum(counts.values()),
        unique_tokens=len(counts),
    )


class BucketStat(NamedTuple):
    threshold: int
    unique_tokens: int
    comments_containing: int


def _validate_thresholds(thresholds) -> tuple[int, ...]:
    thresholds = tuple(thresholds)
    if not thresholds:
        raise InvalidThresholds("thresholds must be non-empty")
    if any(t < 0 for t in thresholds):
        raise InvalidThresholds(f"negative threshold in {thresholds}")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise InvalidThresholds(f"thresholds must be strictly increasing: {thresholds}")
    return thresholds


def frequency_bucket_stats(
    table: FrequencyTable,
    corpus: Corpus,
    thresholds: Iterable[int],
    field: str = "comment",
) -> list[BucketStat]:
    """Per threshold x: unique tokens with frequency <= x, and how many
    comments contain at least one such token. Tokens absent from the table
    count as frequency 0.
    """
    thresholds = _validate_thresholds(thresholds)
    sorted_counts = sorted(table.counts.values())
    # a comment qualifies for x iff its rarest token has frequency <= x
    min_freqs = []
    for ex in corpus:
        tokens = tokenize(getattr(ex, field))
        if tokens:
            min_freqs.append(min(table.counts.get(t, 0) for t in tokens))
    min_freqs.sort()
    return [
        BucketStat(
            threshold=x,
            unique_tokens=bisect_right(sorted_counts, x),
            comments_containing=bisect_right(min_freqs, x),
        )
        for x in thresholds
    ]
