from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))
sys.path.insert(0, str(Path(__file__).resolve().parent))

from rcg.corpus import Corpus, ReviewExample


def make_corpus(rows, split="train"):
    """rows: (id, code, comment) triples."""
    return Corpus(ReviewExample(id=i, code=c, comment=m, split=split) for i, c, m in rows)


def write_jsonl_corpus(path: Path, rows, split="train"):
    with open(path, "w", encoding="utf-8") as fh:
        for i, code, comment in rows:
            fh.write(
                json.dumps({"id": i, "code": code, "comment": comment, "split": split}) + "\n"
            )
    return path


@pytest.fixture
def toy_corpus():
    return make_corpus(
        [
            ("a", "int add(int x, int y) { return x + y; }", "consider overflow here"),
            ("b", "void log(String msg) { out.println(msg); }", "use a logger instead"),
            ("c", "boolean empty() { return size == 0; }", "rename this to isEmpty"),
        ]
    )


@pytest.fixture
def dup_fixture_rows():
    """Ten train rows where rows 0 and 5 share byte-identical code."""
    rows = []
    for i in range(10):
        code = f"void f{i}() {{ call_{i}(); }}"
        rows.append((f"t{i:02d}", code, f"comment number {i}"))
    rows[5] = ("t05", rows[0][1], "duplicate of the first snippet")
    return rows
