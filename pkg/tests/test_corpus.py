import json

import pytest

from commenteval.corpus import (
    MAPPINGS,
    CodeCommentPair,
    EvalCorpus,
    FieldMapping,
    corpus_stats,
    ingest_jsonl,
    write_error_ledger,
    write_jsonl,
)
from commenteval.errors import CommentEvalError, IngestAborted

from conftest import make_corpus, write_corpus_file


def test_ingest_three_line_fixture(tmp_path):
    records = [
        {"id": "a", "language": "Java", "code": "int f(){}", "docstring": "a b"},
        {"id": "b", "language": "python", "code": "def g(): pass", "docstring": "c"},
        {"id": "c", "language": "java", "code": "int h(){}", "docstring": "d e f"},
    ]
    path = write_corpus_file(tmp_path / "c.jsonl", records)
    result = ingest_jsonl(path)
    assert [p.id for p in result.corpus.pairs] == ["a", "b", "c"]
    assert result.corpus.pairs[0].language == "java"  # canonical lowercase
    assert result.corpus.pairs[0].comment == "a b"
    assert result.errors == []


def test_ingest_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    result = ingest_jsonl(path)
    assert len(result.corpus) == 0
    assert result.errors == []


def test_ingest_malformed_line_lenient(tmp_path):
    lines = [
        json.dumps({"id": "a", "code": "x", "docstring": "1"}),
        json.dumps({"id": "b", "code": "x", "docstring": "2"}),
        "{not json",
        json.dumps({"id": "d", "code": "x", "docstring": "4"}),
        json.dumps({"id": "e", "code": "x", "docstring": "5"}),
    ]
    path = tmp_path / "c.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    result = ingest_jsonl(path)
    assert len(result.corpus) == 4
    assert len(result.errors) == 1
    assert result.errors[0].line_no == 3


def test_ingest_strict_aborts(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id": "a", "code": "x", "docstring": "1"}\nnope\n',
                    encoding="utf-8")
    with pytest.raises(IngestAborted) as excinfo:
        ingest_jsonl(path, strict=True)
    assert excinfo.value.line_no == 2


def test_ingest_missing_mapped_field(tmp_path):
    path = write_corpus_file(tmp_path / "c.jsonl",
                             [{"id": "a", "code": "x"}])  # no docstring
    result = ingest_jsonl(path)
    assert len(result.corpus) == 0
    assert "docstring" in result.errors[0].message


def test_ingest_empty_code_rejected(tmp_path):
    path = write_corpus_file(tmp_path / "c.jsonl",
                             [{"id": "a", "code": "", "docstring": "x"}])
    result = ingest_jsonl(path)
    assert len(result.corpus) == 0
    assert len(result.errors) == 1


def test_ingest_synthesizes_ids(tmp_path):
    path = write_corpus_file(tmp_path / "noids.jsonl",
                             [{"code": "x", "docstring": "a"},
                              {"code": "y", "docstring": "b"}])
    result = ingest_jsonl(path)
    assert result.corpus.ids() == ["noids:1", "noids:2"]


def test_ingest_duplicate_id_leniently_skipped(tmp_path):
    path = write_corpus_file(tmp_path / "c.jsonl", [
        {"id": "a", "code": "x", "docstring": "1"},
        {"id": "a", "code": "y", "docstring": "2"},
    ])
    result = ingest_jsonl(path)
    assert result.corpus.ids() == ["a"]
    assert "duplicate" in result.errors[0].message


def test_ingest_csn_mapping(tmp_path):
    record = {"repo": "r", "path": "p", "func_name": "F.f",
              "original_string": "...", "code": "int f(){}",
              "docstring": "does f", "language": "java"}
    path = write_corpus_file(tmp_path / "csn.jsonl", [record])
    result = ingest_jsonl(path, mapping=MAPPINGS["csn"])
    assert result.corpus.ids() == ["csn:1"]
    assert result.corpus.pairs[0].comment == "does f"


def test_round_trip_identity(tmp_path, three_pair_records):
    path = write_corpus_file(tmp_path / "in.jsonl", three_pair_records)
    first = ingest_jsonl(path).corpus
    out = write_jsonl(first, tmp_path / "out.jsonl")
    second = ingest_jsonl(out).corpus
    assert second.pairs == first.pairs


def test_error_ledger_sibling_file(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text("bad\n", encoding="utf-8")
    result = ingest_jsonl(path)
    ledger = write_error_ledger(result.errors, path)
    assert ledger == tmp_path / "c.jsonl.errors"
    entry = json.loads(ledger.read_text(encoding="utf-8").splitlines()[0])
    assert entry["line"] == 1


def test_stats_hand_counts():
    corpus = make_corpus([
        {"id": "1", "comment": "a b"},
        {"id": "2", "comment": "a b c d"},
    ])
    stats = corpus_stats(corpus)
    assert stats.pair_count == 2
    assert stats.mean_comment_len == 3.0
    assert stats.median_comment_len == 3.0
    assert stats.unique_words == 4


def test_stats_empty_corpus():
    stats = corpus_stats(EvalCorpus([], name="empty"))
    assert stats.pair_count == 0
    assert stats.mean_comment_len == 0.0
    assert stats.median_comment_len == 0.0
    assert stats.unique_words == 0
    assert stats.per_language == {}


def test_stats_single_comment_repeated_word():
    stats = corpus_stats(make_corpus([{"id": "1", "comment": "x x x"}]))
    assert stats.mean_comment_len == 3.0
    assert stats.unique_words == 1


def test_stats_case_sensitive_unique_words():
    stats = corpus_stats(make_corpus([{"id": "1", "comment": "Word word"}]))
    assert stats.unique_words == 2


def test_stats_permutation_invariant():
    records = [{"id": str(i), "comment": f"tok{i} shared", "language": "java" if i % 2 else "go"}
               for i in range(7)]
    forward = corpus_stats(make_corpus(records))
    backward = corpus_stats(make_corpus(list(reversed(records))))
    assert forward == backward


def test_stats_unique_words_subadditive():
    part_a = [{"id": f"a{i}", "comment": "alpha beta"} for i in range(3)]
    part_b = [{"id": f"b{i}", "comment": "beta gamma"} for i in range(3)]
    whole = corpus_stats(make_corpus(part_a + part_b)).unique_words
    parts = (corpus_stats(make_corpus(part_a)).unique_words
             + corpus_stats(make_corpus(part_b)).unique_words)
    assert whole <= parts


def test_stats_per_language_breakdown():
    stats = corpus_stats(make_corpus([
        {"id": "1", "language": "java", "comment": "a b"},
        {"id": "2", "language": "java", "comment": "c d e f"},
        {"id": "3", "language": "go", "comment": "g"},
    ]))
    assert stats.per_language["java"].pair_count == 2
    assert stats.per_language["java"].mean_comment_len == 3.0
    assert stats.per_language["go"].unique_words == 1


def test_corpus_rejects_duplicate_ids():
    with pytest.raises(CommentEvalError):
        EvalCorpus([
            CodeCommentPair(id="a", language="java", code="x", comment="1"),
            CodeCommentPair(id="a", language="java", code="y", comment="2"),
        ])


def test_corpus_rejects_empty_id():
    with pytest.raises(CommentEvalError):
        EvalCorpus([CodeCommentPair(id="", language="java", code="x", comment="1")])
