"""Scoring for generated review comments.

Covers single-reference BLEU-4 with brevity penalty (sentence and
corpus pooling), exact match with recorded normalization, low-frequency
ground-truth token counting, and BLEU-by-length bucket tables.
"""

from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

from .corpus import FrequencyTable, _validate_thresholds
from .errors import AlignmentError, EmptyInput, EmptyReference
from .tokenizer import count_tokens, tokenize

SMOOTHING_MODES = ("none", "add_one")
DEFAULT_LFGT_THRESHOLDS = (20, 40, 60, 80, 100)
MAX_NGRAM = 4


@dataclass(frozen=True)
class BleuReport:
    score: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    candidate_length: int
    reference_length: int
    mode: str

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "precisions": list(self.precisions),
            "brevity_penalty": self.brevity_penalty,
            "candidate_length": self.candidate_length,
            "reference_length": self.reference_length,
            "mode": self.mode,
        }


@dataclass(frozen=True)
class LfgtReport:
    thresholds: tuple[int, ...]
    counts: tuple[int, ...]
    baseline_counts: tuple[int, ...] | None = None
    improvement_pct: tuple[float | None, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "counts": list(self.counts),
            "baseline_counts": None if self.baseline_counts is None else list(self.baseline_counts),
            "improvement_pct": None if self.improvement_pct is None else list(self.improvement_pct),
        }


@dataclass(frozen=True)
class EvalReport:
    n_instances: int
    em_pct: float
    em_strict_pct: float
    bleu: BleuReport
    bleu_corpus: BleuReport
    lfgt: LfgtReport
    length_buckets: dict

    def to_dict(self) -> dict:
        return {
            "n_instances": self.n_instances,
            "em_pct": self.em_pct,
            "em_strict_pct": self.em_strict_pct,
            "bleu_sentence": self.bleu.to_dict(),
            "bleu_corpus": self.bleu_corpus.to_dict(),
            "lfgt": self.lfgt.to_dict(),
            "length_buckets": self.length_buckets,
        }


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _match_stats(candidate: Sequence[str], reference: Sequence[str]) -> list[tuple[int, int]]:
    """(clipped matches, candidate n-gram count) for n = 1..4."""
    stats = []
    for n in range(1, MAX_NGRAM + 1):
        cand_counts = _ngram_counts(candidate, n)
        ref_counts = _ngram_counts(reference, n)
        matches = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
        stats.append((matches, sum(cand_counts.values())))
    return stats


def _score_from_stats(
    stats: Sequence[tuple[int, int]],
    cand_len: int,
    ref_len: int,
    smoothing: str,
    mode: str,
) -> BleuReport:
    if smoothing not in SMOOTHING_MODES:
        raise ValueError(f"unknown smoothing {smoothing!r}; expected one of {SMOOTHING_MODES}")
    if cand_len == 0:
        return BleuReport(0.0, (0.0, 0.0, 0.0, 0.0), 0.0, 0, ref_len, mode)
    precisions = []
    log_sum = 0.0
    hit_zero = False
    for n, (matches, guesses) in enumerate(stats, start=1):
        if guesses == 0:
            # candidate too short to have any n-grams: vacuously perfect
            p = 1.0
        elif matches == 0:
            if smoothing == "add_one" and n >= 2:
                p = 1.0 / (guesses + 1)
            else:
                p = 0.0
                hit_zero = True
        else:
            p = matches / guesses
        precisions.append(p)
        if p > 0.0:
            log_sum += math.log(p)
    bp = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
    score = 0.0 if hit_zero else 100.0 * bp * math.exp(log_sum / MAX_NGRAM)
    return BleuReport(score, tuple(precisions), bp, cand_len, ref_len, mode)


def bleu4(
    candidate: Sequence[str],
    reference: Sequence[str],
    smoothing: str = "add_one",
) -> BleuReport:
    """Single-reference sentence BLEU-4 with brevity penalty.

    add_one smoothing replaces a zero match count with 1/(guesses+1) for
    n >= 2; with smoothing none any zero precision makes the score 0.
    """
    if not reference:
        raise EmptyReference("reference token sequence is empty")
    stats = _match_stats(candidate, reference)
    return _score_from_stats(stats, len(candidate), len(reference), smoothing, "sentence_avg")


def corpus_bleu4(pairs: Sequence[tuple[Sequence[str], Sequence[str]]]) -> BleuReport:
    """Pooled n-gram statistics across pairs, one brevity penalty from summed lengths."""
    if not pairs:
        raise EmptyInput("corpus_bleu4 needs at least one candidate/reference pair")
    pooled = [[0, 0] for _ in range(MAX_NGRAM)]
    cand_len = 0
    ref_len = 0
    for candidate, reference in pairs:
        if not reference:
            raise EmptyReference("reference token sequence is empty")
        cand_len += len(candidate)
        ref_len += len(reference)
        for pos, (matches, guesses) in enumerate(_match_stats(candidate, reference)):
            pooled[pos][0] += matches
            pooled[pos][1] += guesses
    stats = [tuple(item) for item in pooled]
    return _score_from_stats(stats, cand_len, ref_len, "none", "corpus")


def mean_sentence_bleu4(
    pairs: Sequence[tuple[Sequence[str], Sequence[str]]],
    smoothing: str = "add_one",
) -> BleuReport:
    """Sentence BLEU-4 averaged over instances (the default reported score)."""
    if not pairs:
        raise EmptyInput("mean_sentence_bleu4 needs at least one pair")
    reports = [bleu4(candidate, reference, smoothing) for candidate, reference in pairs]
    n = len(reports)
    return BleuReport(
        score=sum(r.score for r in reports) / n,
        precisions=tuple(sum(r.precisions[i] for r in reports) / n for i in range(MAX_NGRAM)),
        brevity_penalty=sum(r.brevity_penalty for r in reports) / n,
        candidate_length=sum(r.candidate_length for r in reports),
        reference_length=sum(r.reference_length for r in reports),
        mode="sentence_avg",
    )


_WS_RUN = re.compile(r"\s+")


def normalize_for_match(text: str) -> str:
    return _WS_RUN.sub(" ", unicodedata.normalize("NFC", text).strip())


def exact_match(candidates: Sequence[str], references: Sequence[str]) -> float:
    """Percentage of pairs equal after NFC + trim + whitespace-run collapse."""
    _check_aligned(candidates, references)
    hits = sum(
        normalize_for_match(c) == normalize_for_match(r) for c, r in zip(candidates, references)
    )
    return 100.0 * hits / len(candidates)


def exact_match_strict(candidates: Sequence[str], references: Sequence[str]) -> float:
    """Percentage of pairs equal character-for-character, no normalization."""
    _check_aligned(candidates, references)
    hits = sum(c == r for c, r in zip(candidates, references))
    return 100.0 * hits / len(candidates)


def _check_aligned(candidates, references):
    if len(candidates) != len(references):
        raise AlignmentError(f"{len(candidates)} candidates vs {len(references)} references")
    if not candidates:
        raise EmptyInput("need at least one candidate/reference pair")


def improvement_pct(baseline: int, treatment: int) -> float | None:
    """Relative gain over a baseline count, in percent; None when baseline is 0."""
    if baseline == 0:
        return None
    return 100.0 * (treatment - baseline) / baseline


def lfgt_analysis(
    candidates: Sequence[str],
    references: Sequence[str],
    freq_table: FrequencyTable,
    thresholds: Sequence[int] | None = None,
    baseline_counts: Sequence[int] | None = None,
) -> LfgtReport:
    """Count correctly generated tokens per frequency threshold.

    A token counts for threshold x when it appears in both the candidate
    and the reference (set semantics, once per instance) and its training
    frequency is <= x; tokens absent from the table count as frequency 0.
    """
    _check_aligned(candidates, references)
    thresholds = _validate_thresholds(
        DEFAULT_LFGT_THRESHOLDS if thresholds is None else thresholds
    )
    totals = [0] * len(thresholds)
    for candidate, reference in zip(candidates, references):
        shared = set(tokenize(candidate)) & set(tokenize(reference))
        for token in shared:
            freq = freq_table.counts.get(token, 0)
            for pos, limit in enumerate(thresholds):
                if freq <= limit:
                    totals[pos] += 1
    improvements = None
    if baseline_counts is not None:
        baseline_counts = tuple(baseline_counts)
        if len(baseline_counts) != len(thresholds):
            raise AlignmentError(
                f"{len(baseline_counts)} baseline counts vs {len(thresholds)} thresholds"
            )
        improvements = tuple(
            improvement_pct(base, total) for base, total in zip(baseline_counts, totals)
        )
    return LfgtReport(
        thresholds=thresholds,
        counts=tuple(totals),
        baseline_counts=baseline_counts,
        improvement_pct=improvements,
    )


def length_bucket_report(
    triples: Sequence[tuple[str, str, str]],
    code_bucket: int = 20,
    comment_bucket: int = 10,
) -> tuple[dict[tuple[int, int], float], dict[tuple[int, int], float]]:
    """Mean sentence BLEU-4 (add-one) grouped by code length and by
    reference-comment length; instance lengths land in [k*w, (k+1)*w)."""
    if not triples:
        raise EmptyInput("length_bucket_report needs at least one instance")
    if code_bucket < 1 or comment_bucket < 1:
        raise ValueError("bucket widths must be >= 1")
    by_code: dict[tuple[int, int], list[float]] = defaultdict(list)
    by_comment: dict[tuple[int, int], list[float]] = defaultdict(list)
    for code, candidate, reference in triples:
        score = bleu4(tokenize(candidate), tokenize(reference), "add_one").score
        code_lo = (count_tokens(code) // code_bucket) * code_bucket
        comment_lo = (count_tokens(reference) // comment_bucket) * comment_bucket
        by_code[(code_lo, code_lo + code_bucket)].append(score)
        by_comment[(comment_lo, comment_lo + comment_bucket)].append(score)
    mean = lambda xs: sum(xs) / len(xs)
    return (
        {bucket: mean(scores) for bucket, scores in sorted(by_code.items())},
        {bucket: mean(scores) for bucket, scores in sorted(by_comment.items())},
    )


def build_eval_report(
    codes: Sequence[str],
    candidates: Sequence[str],
    references: Sequence[str],
    freq_table: FrequencyTable,
    *,
    lfgt_thresholds: Sequence[int] | None = None,
    smoothing: str = "add_one",
    code_bucket: int = 20,
    comment_bucket: int = 10,
    baseline_counts: Sequence[int] | None = None,
) -> EvalReport:
    _check_aligned(candidates, references)
    if len(codes) != len(candidates):
        raise AlignmentError(f"{len(codes)} codes vs {len(candidates)} candidates")
    token_pairs = [(tokenize(c), tokenize(r)) for c, r in zip(candidates, references)]
    code_table, comment_table = length_bucket_report(
        list(zip(codes, candidates, references)), code_bucket, comment_bucket
    )
    label = lambda bucket: f"[{bucket[0]},{bucket[1]})"
    return EvalReport(
        n_instances=len(candidates),
        em_pct=exact_match(candidates, references),
        em_strict_pct=exact_match_strict(candidates, references),
        bleu=mean_sentence_bleu4(token_pairs, smoothing),
        bleu_corpus=corpus_bleu4(token_pairs),
        lfgt=lfgt_analysis(candidates, references, freq_table, lfgt_thresholds, baseline_counts),
        length_buckets={
            "code": {label(b): v for b, v in code_table.items()},
            "comment": {label(b): v for b, v in comment_table.items()},
        },
    )
