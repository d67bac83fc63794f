import json

import numpy as np
import pytest

from commenteval.ccid import Verdict
from commenteval.corpus import CodeCommentPair, EvalCorpus


def make_corpus(records, name="fixture") -> EvalCorpus:
    pairs = [
        CodeCommentPair(
            id=r["id"],
            language=r.get("language", "java"),
            code=r.get("code", "int f(){return 1;}"),
            comment=r.get("comment", ""),
            source=r.get("source", "human_reference"),
            split=r.get("split", "none"),
        )
        for r in records
    ]
    return EvalCorpus(pairs, name=name)


def write_corpus_file(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r) + "\n")
    return path


class DictVectorBackend:
    """Embeds by (kind, id) lookup from in-test dictionaries."""

    backend_id = "stub:dict"

    def __init__(self, comment_query=None, code=None, summary=None):
        self.tables = {
            "comment_query": comment_query or {},
            "code": code or {},
            "summary": summary or {},
        }

    def embed(self, kind, items):
        table = self.tables[kind]
        return [np.asarray(table[pair_id], dtype=float) for pair_id, _text in items]


class StubClassifier:
    """Flags exactly the given pair ids."""

    backend_id = "stub:flag-ids"

    def __init__(self, flagged_ids):
        self.flagged = set(flagged_ids)

    def classify(self, pairs):
        return [Verdict(p.id, p.id in self.flagged) for p in pairs]


class SentinelClassifier:
    """Flags pairs whose comment contains the sentinel token."""

    backend_id = "stub:sentinel"

    def __init__(self, token="INCONSISTENT!"):
        self.token = token

    def classify(self, pairs):
        return [Verdict(p.id, self.token in p.comment) for p in pairs]


@pytest.fixture
def three_pair_records():
    return [
        {"id": "p1", "language": "java", "code": "int a(){return 1;}",
         "docstring": "returns one"},
        {"id": "p2", "language": "python", "code": "def b():\n    return 2",
         "docstring": "returns two"},
        {"id": "p3", "language": "go", "code": "func c() int { return 3 }",
         "docstring": "returns three"},
    ]
