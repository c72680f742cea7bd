"""Budget-constrained prompt assembly with exemplar augmentation.

A prompt is the query code followed by retrieved exemplars in rank
order. Pair exemplars contribute " [nsep] <comment> [csep] <code>",
singleton exemplars " [nsep] <comment>". Exemplars are packed greedily
as whole units; if the bare query alone is over budget it is truncated
to the first ``budget`` tokens and nothing is appended.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidBudget
from .index import Exemplar
from .tokenizer import count_tokens, join_tokens, tokenize

NSEP = "[nsep]"
CSEP = "[csep]"
STRATEGIES = ("none", "singleton", "pair")
DEFAULT_BUDGET = 512


@dataclass(frozen=True)
class Prompt:
    query_id: str
    text: str
    included_exemplar_ids: tuple[str, ...]
    strategy: str
    token_count: int
    budget: int

    def to_record(self) -> dict:
        return {
            "query_id": self.query_id,
            "text": self.text,
            "exemplars": list(self.included_exemplar_ids),
            "strategy": self.strategy,
            "token_count": self.token_count,
        }


def build_prompt(
    query_id: str,
    query_code: str,
    exemplars: Sequence[Exemplar],
    strategy: str,
    budget: int = DEFAULT_BUDGET,
) -> Prompt:
    if budget == 0:
        raise InvalidBudget("budget must be at least 1 token")
    if budget < 0:
        raise InvalidBudget(f"budget must be positive, got {budget}")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")

    query_tokens = count_tokens(query_code)
    if query_tokens > budget:
        text = join_tokens(tokenize(query_code)[:budget])
        return Prompt(query_id, text, (), strategy, budget, budget)

    text = query_code
    total = query_tokens
    included: list[str] = []
    if strategy != "none":
        for ex in exemplars:
            if strategy == "pair":
                addition = f" {NSEP} {ex.comment} {CSEP} {ex.code}"
            else:
                addition = f" {NSEP} {ex.comment}"
            added = count_tokens(addition)
            if total + added > budget:
                break
            text += addition
            total += added
            included.append(ex.id)
    return Prompt(query_id, text, tuple(included), strategy, total, budget)


def sweep_prompts(
    query_id: str,
    query_code: str,
    exemplars: Sequence[Exemplar],
    strategy: str,
    budget: int,
    k_values: Sequence[int],
) -> list[Prompt]:
    """One prompt per k over the top-k exemplar prefix; k=0 is the bare query."""
    for k in k_values:
        if k < 0:
            raise ValueError(f"k must be >= 0, got {k}")
        if k > len(exemplars):
            raise ValueError(f"k={k} exceeds the {len(exemplars)} retrieved exemplars")
    prompts = []
    for k in k_values:
        if k == 0:
            prompts.append(build_prompt(query_id, query_code, (), "none", budget))
        else:
            prompts.append(build_prompt(query_id, query_code, exemplars[:k], strategy, budget))
    return prompts
