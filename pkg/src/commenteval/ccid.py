"""Inconsistency tooling: dataset construction from consecutive-commit
pairs, and the inconsistency-rate metric over a pluggable classifier.

Construction rule per commit pair (c1, nl1) -> (c2, nl2): samples whose
code did not change contribute nothing; a changed comment makes the
cross pairings (c1, nl2) and (c2, nl1) inconsistent examples; an
unchanged comment makes both same-version pairings consistent examples.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import requests

from .corpus import EvalCorpus
from .errors import BackendFailure, CommentEvalError

LABEL_CONSISTENT = "consistent"
LABEL_INCONSISTENT = "inconsistent"

PAIRING_C1_NL1 = "c1+nl1"
PAIRING_C1_NL2 = "c1+nl2"
PAIRING_C2_NL1 = "c2+nl1"
PAIRING_C2_NL2 = "c2+nl2"


@dataclass(frozen=True)
class CommitPairSample:
    id: str
    code_before: str
    code_after: str
    comment_before: str
    comment_after: str
    language: str = "java"


@dataclass(frozen=True)
class Provenance:
    sample_id: str
    pairing: str  # e.g. "c2+nl1"


@dataclass(frozen=True)
class CcidExample:
    code: str
    comment: str
    label: str
    provenance: Provenance

    def to_record(self) -> dict:
        return {
            "code": self.code,
            "comment": self.comment,
            "label": self.label,
            "provenance": {
                "sample_id": self.provenance.sample_id,
                "pairing": self.provenance.pairing,
            },
        }


def _normalized(text: str) -> str:
    return "\n".join(line.rstrip() for line in text.splitlines())


def texts_equal(a: str, b: str) -> bool:
    """Byte equality after trimming trailing whitespace per line."""
    return _normalized(a) == _normalized(b)


def build_ccid_dataset(samples, emit_changed_consistent: bool = False) -> list[CcidExample]:
    """Emit 0, 2, or 4 examples per sample; exact duplicates are dropped
    (first occurrence wins), order otherwise stable."""
    out: list[CcidExample] = []
    seen: set[tuple[str, str, str]] = set()

    def emit(sample_id: str, code: str, comment: str, label: str, pairing: str):
        key = (code, comment, label)
        if key in seen:
            return
        seen.add(key)
        out.append(CcidExample(code, comment, label, Provenance(sample_id, pairing)))

    for s in samples:
        if texts_equal(s.code_before, s.code_after):
            continue
        if not texts_equal(s.comment_before, s.comment_after):
            emit(s.id, s.code_before, s.comment_after, LABEL_INCONSISTENT, PAIRING_C1_NL2)
            emit(s.id, s.code_after, s.comment_before, LABEL_INCONSISTENT, PAIRING_C2_NL1)
            if emit_changed_consistent:
                emit(s.id, s.code_before, s.comment_before, LABEL_CONSISTENT, PAIRING_C1_NL1)
                emit(s.id, s.code_after, s.comment_after, LABEL_CONSISTENT, PAIRING_C2_NL2)
        else:
            emit(s.id, s.code_before, s.comment_before, LABEL_CONSISTENT, PAIRING_C1_NL1)
            emit(s.id, s.code_after, s.comment_after, LABEL_CONSISTENT, PAIRING_C2_NL2)

    return out


def read_commit_pairs(path) -> list[CommitPairSample]:
    """Line-delimited {"id","code_before","code_after","comment_before","comment_after"[,"language"]}."""
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            record = json.loads(line)
            samples.append(CommitPairSample(
                id=str(record.get("id") or f"sample:{line_no}"),
                code_before=record["code_before"],
                code_after=record["code_after"],
                comment_before=record["comment_before"],
                comment_after=record["comment_after"],
                language=str(record.get("language") or "java").lower(),
            ))
    return samples


def write_ccid_dataset(examples, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_record(), ensure_ascii=False) + "\n")
    return path


@dataclass(frozen=True)
class Verdict:
    id: str
    inconsistent: bool
    confidence: float = 1.0


class VerdictFileBackend:
    """Precomputed verdicts, one {"id","inconsistent"[,"confidence"]} per line.

    The file must cover every id it is asked about; extra ids are ignored.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.backend_id = f"verdicts:{self.path}"
        self._verdicts: dict[str, Verdict] = {}
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                vid = str(record["id"])
                self._verdicts[vid] = Verdict(
                    id=vid,
                    inconsistent=bool(record["inconsistent"]),
                    confidence=float(record.get("confidence", 1.0)),
                )

    def classify(self, pairs) -> list[Verdict]:
        out = []
        for pair in pairs:
            verdict = self._verdicts.get(pair.id)
            if verdict is None:
                raise BackendFailure("no verdict on file", pair_id=pair.id)
            out.append(verdict)
        return out


class HttpClassifierBackend:
    """POSTs {"pairs":[{"id","code","comment"}]} to <base>/v1/classify."""

    def __init__(self, base_url: str, batch_size: int = 32, timeout: float = 60.0,
                 session=None):
        self.base_url = base_url.rstrip("/")
        self.backend_id = f"http:{self.base_url}"
        self.batch_size = batch_size
        self.timeout = timeout
        self._session = session or requests.Session()

    def classify(self, pairs) -> list[Verdict]:
        pairs = list(pairs)
        out: list[Verdict] = []
        for start in range(0, len(pairs), self.batch_size):
            chunk = pairs[start:start + self.batch_size]
            first_id = chunk[0].id
            try:
                resp = self._session.post(
                    f"{self.base_url}/v1/classify",
                    json={"pairs": [
                        {"id": p.id, "code": p.code, "comment": p.comment}
                        for p in chunk
                    ]},
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                raise BackendFailure(f"classifier request failed: {exc}", pair_id=first_id)
            if resp.status_code != 200:
                raise BackendFailure(
                    f"classifier backend returned {resp.status_code}", pair_id=first_id)
            verdicts = resp.json().get("verdicts")
            if not isinstance(verdicts, list) or len(verdicts) != len(chunk):
                raise BackendFailure("classifier response count mismatch", pair_id=first_id)
            by_id = {str(v["id"]): v for v in verdicts}
            for p in chunk:
                v = by_id.get(p.id)
                if v is None:
                    raise BackendFailure("verdict missing from response", pair_id=p.id)
                out.append(Verdict(
                    id=p.id,
                    inconsistent=bool(v["inconsistent"]),
                    confidence=float(v.get("confidence", 1.0)),
                ))
        return out


def classify_pair(pair, backend) -> Verdict:
    """Single-pair verdict, backend output passed through verbatim."""
    return backend.classify([pair])[0]


@dataclass
class IncRateResult:
    inc_rate: float
    flagged_ids: list[str]
    total: int
    backend_id: str

    def to_dict(self) -> dict:
        return {
            "inc_rate": self.inc_rate,
            "flagged": len(self.flagged_ids),
            "total": self.total,
            "backend_id": self.backend_id,
            "flagged_ids": self.flagged_ids,
        }


def inc_rate(corpus: EvalCorpus, backend, chunk_size: int = 256) -> IncRateResult:
    """Fraction of pairs the classifier flags inconsistent.

    A backend failure aborts; the raised error carries how many pairs had
    been classified and how many were flagged up to that point.
    """
    if len(corpus) == 0:
        raise CommentEvalError("inc_rate needs a non-empty corpus")
    flagged: list[str] = []
    processed = 0
    pairs = list(corpus.pairs)
    for start in range(0, len(pairs), chunk_size):
        chunk = pairs[start:start + chunk_size]
        try:
            verdicts = backend.classify(chunk)
        except BackendFailure as exc:
            exc.processed = processed
            exc.flagged_so_far = len(flagged)
            raise
        processed += len(chunk)
        flagged.extend(v.id for v in verdicts if v.inconsistent)
    flagged.sort()
    return IncRateResult(
        inc_rate=len(flagged) / len(pairs),
        flagged_ids=flagged,
        total=len(pairs),
        backend_id=getattr(backend, "backend_id", ""),
    )
