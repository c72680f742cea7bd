"""Rule-based tokenization shared by statistics, metrics, and prompt budgets.

Text is NFC-normalized and split on whitespace; identifier-like runs
(letters, digits, underscore) stay whole, every other character becomes
its own single-character token. Case is preserved.
"""

import re
import unicodedata

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(unicodedata.normalize("NFC", text))


def count_tokens(text: str) -> int:
    return len(tokenize(text))


def join_tokens(tokens: list[str]) -> str:
    """Single-space detokenization; re-tokenizing the result is a no-op."""
    return " ".join(tokens)
