"""Canonical corpus model, line-delimited ingestion, and descriptive stats.

A corpus is an ordered list of code/comment pairs read from a UTF-8 file
with one JSON object per line. Field names are configurable so that both
the canonical format and CodeSearchNet-style records load without a
conversion step.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from math import fsum
from pathlib import Path

from .errors import CommentEvalError, IngestAborted

KNOWN_LANGUAGES = ("java", "python", "php", "javascript", "go", "ruby")
SPLITS = ("train", "valid", "test", "none")
SOURCE_HUMAN = "human_reference"

STATS_TOKENIZER_ID = "whitespace"


def model_source(name: str) -> str:
    """Source tag for comments generated by a model."""
    return f"model:{name}"


@dataclass(frozen=True)
class CodeCommentPair:
    id: str
    language: str
    code: str
    comment: str
    source: str = SOURCE_HUMAN  # "human_reference" or "model:<name>"
    split: str = "none"

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "language": self.language,
            "code": self.code,
            "docstring": self.comment,
            "source": self.source,
            "split": self.split,
        }


@dataclass
class EvalCorpus:
    pairs: list[CodeCommentPair]
    name: str = ""

    def __post_init__(self):
        seen = set()
        for pair in self.pairs:
            if not pair.id:
                raise CommentEvalError("corpus pair with empty id")
            if pair.id in seen:
                raise CommentEvalError(f"duplicate id in corpus: {pair.id!r}")
            seen.add(pair.id)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def ids(self) -> list[str]:
        return [p.id for p in self.pairs]

    def by_id(self) -> dict[str, CodeCommentPair]:
        return {p.id: p for p in self.pairs}


@dataclass(frozen=True)
class FieldMapping:
    """Names of the record fields to read; ``id=None`` always synthesizes ids."""

    code: str = "code"
    comment: str = "docstring"
    id: str | None = "id"
    language: str = "language"
    source: str = "source"
    split: str = "split"


MAPPINGS = {
    "canonical": FieldMapping(),
    # CodeSearchNet releases carry no stable id field; synthesize one.
    "csn": FieldMapping(id=None),
}


@dataclass(frozen=True)
class IngestIssue:
    line_no: int
    message: str


@dataclass
class IngestResult:
    corpus: EvalCorpus
    errors: list[IngestIssue] = field(default_factory=list)


def _normalize_source(value) -> str:
    if value in (None, "", "human", SOURCE_HUMAN):
        return SOURCE_HUMAN
    return str(value)


def ingest_jsonl(path, mapping: FieldMapping | None = None, strict: bool = False,
                 name: str | None = None) -> IngestResult:
    """Read one pair per line, in file order.

    Lenient mode (default) collects malformed lines into the error ledger
    and keeps going; strict mode aborts on the first problem. Ids come
    from the mapped field when present, otherwise "<name>:<line-number>".
    """
    path = Path(path)
    mapping = mapping or FieldMapping()
    corpus_name = name if name is not None else path.stem

    pairs: list[CodeCommentPair] = []
    errors: list[IngestIssue] = []
    seen_ids: set[str] = set()

    def bad(line_no: int, message: str):
        if strict:
            raise IngestAborted(line_no, message)
        errors.append(IngestIssue(line_no, message))

    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                bad(line_no, f"malformed record: {exc.msg}")
                continue
            if not isinstance(record, dict):
                bad(line_no, "record is not an object")
                continue

            code = record.get(mapping.code)
            if code is None:
                bad(line_no, f"missing field {mapping.code!r}")
                continue
            if not str(code):
                bad(line_no, "empty code")
                continue
            comment = record.get(mapping.comment)
            if comment is None:
                bad(line_no, f"missing field {mapping.comment!r}")
                continue

            pair_id = None
            if mapping.id is not None:
                raw_id = record.get(mapping.id)
                if raw_id is not None and str(raw_id):
                    pair_id = str(raw_id)
            if pair_id is None:
                pair_id = f"{corpus_name}:{line_no}"
            if pair_id in seen_ids:
                bad(line_no, f"duplicate id {pair_id!r}")
                continue

            language = str(record.get(mapping.language) or "other").strip().lower()
            split = str(record.get(mapping.split) or "none").strip().lower()
            if split not in SPLITS:
                bad(line_no, f"unknown split {split!r}, using 'none'")
                split = "none"

            seen_ids.add(pair_id)
            pairs.append(CodeCommentPair(
                id=pair_id,
                language=language,
                code=str(code),
                comment=str(comment),
                source=_normalize_source(record.get(mapping.source)),
                split=split,
            ))

    return IngestResult(EvalCorpus(pairs, name=corpus_name), errors)


def write_jsonl(corpus: EvalCorpus, path) -> Path:
    """Serialize in the canonical one-object-per-line format."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for pair in corpus.pairs:
            fh.write(json.dumps(pair.to_record(), ensure_ascii=False) + "\n")
    return path


def write_error_ledger(errors: list[IngestIssue], input_path) -> Path:
    """Write the ingestion ledger as the "<input>.errors" sibling file."""
    path = Path(str(input_path) + ".errors")
    with open(path, "w", encoding="utf-8") as fh:
        for issue in errors:
            fh.write(json.dumps({"line": issue.line_no, "error": issue.message}) + "\n")
    return path


@dataclass(frozen=True)
class StatsBucket:
    pair_count: int
    mean_comment_len: float
    median_comment_len: float
    unique_words: int


@dataclass(frozen=True)
class CorpusStats:
    pair_count: int
    mean_comment_len: float
    median_comment_len: float
    unique_words: int
    per_language: dict[str, StatsBucket]
    tokenizer_id: str = STATS_TOKENIZER_ID

    def to_dict(self) -> dict:
        return {
            "pair_count": self.pair_count,
            "mean_comment_len": self.mean_comment_len,
            "median_comment_len": self.median_comment_len,
            "unique_words": self.unique_words,
            "per_language": {
                lang: {
                    "pair_count": b.pair_count,
                    "mean_comment_len": b.mean_comment_len,
                    "median_comment_len": b.median_comment_len,
                    "unique_words": b.unique_words,
                }
                for lang, b in sorted(self.per_language.items())
            },
            "tokenizer_id": self.tokenizer_id,
        }


def _bucket(comments: list[str]) -> StatsBucket:
    if not comments:
        return StatsBucket(0, 0.0, 0.0, 0)
    token_lists = [c.split() for c in comments]
    lengths = [len(t) for t in token_lists]
    vocab = set()
    for tokens in token_lists:
        vocab.update(tokens)
    return StatsBucket(
        pair_count=len(comments),
        mean_comment_len=fsum(lengths) / len(lengths),
        median_comment_len=float(statistics.median(lengths)),
        unique_words=len(vocab),
    )


def corpus_stats(corpus: EvalCorpus) -> CorpusStats:
    """Comment length in whitespace tokens; unique words counted case-sensitively."""
    overall = _bucket([p.comment for p in corpus.pairs])
    by_language: dict[str, list[str]] = {}
    for pair in corpus.pairs:
        by_language.setdefault(pair.language, []).append(pair.comment)
    return CorpusStats(
        pair_count=overall.pair_count,
        mean_comment_len=overall.mean_comment_len,
        median_comment_len=overall.median_comment_len,
        unique_words=overall.unique_words,
        per_language={lang: _bucket(cs) for lang, cs in by_language.items()},
    )
