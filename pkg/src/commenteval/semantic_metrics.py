"""Embedding-based metrics over a pluggable backend.

Two consumers: similarity of predicted summaries against reference
summaries, and the reference-free retrieval score where each comment
queries a batch of code snippets and the paired snippet's reciprocal
rank is averaged per batch, then over batches.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import requests

from .corpus import EvalCorpus
from .errors import BackendFailure, IdMismatchError

EMBEDDING_KINDS = ("comment_query", "code", "summary")


@dataclass
class EmbeddingVector:
    id: str
    kind: str
    values: np.ndarray


def _values(v) -> np.ndarray:
    arr = np.asarray(getattr(v, "values", v), dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {arr.shape}")
    return arr


def cosine_similarity(u, v) -> float:
    """dot(u,v) / (|u||v|); raises on dimension mismatch or zero norm."""
    a = _values(u)
    b = _values(v)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    na2 = float(a @ a)
    nb2 = float(b @ b)
    if na2 == 0.0 or nb2 == 0.0:
        raise ValueError("zero-norm vector")
    return float(a @ b) / math.sqrt(na2 * nb2)


class VectorFileBackend:
    """Precomputed vectors from a line-delimited {"id","kind","vector"} file."""

    def __init__(self, path):
        self.path = Path(path)
        self.backend_id = f"vectors:{self.path}"
        self._vectors: dict[tuple[str, str], np.ndarray] = {}
        self._dim: int | None = None
        with open(self.path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                record = json.loads(line)
                vec = np.asarray(record["vector"], dtype=float)
                if not np.all(np.isfinite(vec)):
                    raise BackendFailure(f"non-finite vector at line {line_no}",
                                         pair_id=record.get("id"))
                if self._dim is None:
                    self._dim = vec.shape[0]
                elif vec.shape[0] != self._dim:
                    raise BackendFailure(
                        f"ragged vector dimensions at line {line_no}: "
                        f"{vec.shape[0]} vs {self._dim}", pair_id=record.get("id"))
                self._vectors[(record["kind"], record["id"])] = vec

    def embed(self, kind: str, items) -> list[np.ndarray]:
        out = []
        for pair_id, _text in items:
            vec = self._vectors.get((kind, pair_id))
            if vec is None:
                raise BackendFailure(f"no {kind!r} vector on file", pair_id=pair_id)
            out.append(vec)
        return out


class HttpEmbeddingBackend:
    """POSTs {"kind", "texts"} to <base>/v1/embed and expects {"vectors"}."""

    def __init__(self, base_url: str, batch_size: int = 64, timeout: float = 60.0,
                 session=None):
        self.base_url = base_url.rstrip("/")
        self.backend_id = f"http:{self.base_url}"
        self.batch_size = batch_size
        self.timeout = timeout
        self._session = session or requests.Session()
        self._dim: int | None = None

    def embed(self, kind: str, items) -> list[np.ndarray]:
        items = list(items)
        out: list[np.ndarray] = []
        for start in range(0, len(items), self.batch_size):
            chunk = items[start:start + self.batch_size]
            first_id = chunk[0][0]
            try:
                resp = self._session.post(
                    f"{self.base_url}/v1/embed",
                    json={"kind": kind, "texts": [text for _, text in chunk]},
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                raise BackendFailure(f"embedding request failed: {exc}", pair_id=first_id)
            if resp.status_code != 200:
                raise BackendFailure(
                    f"embedding backend returned {resp.status_code}", pair_id=first_id)
            vectors = resp.json().get("vectors")
            if not isinstance(vectors, list) or len(vectors) != len(chunk):
                raise BackendFailure("embedding response count mismatch", pair_id=first_id)
            for (pair_id, _), raw in zip(chunk, vectors):
                vec = np.asarray(raw, dtype=float)
                if vec.ndim != 1 or not np.all(np.isfinite(vec)):
                    raise BackendFailure("bad vector in response", pair_id=pair_id)
                if self._dim is None:
                    self._dim = vec.shape[0]
                elif vec.shape[0] != self._dim:
                    raise BackendFailure(
                        f"ragged vector dimensions: {vec.shape[0]} vs {self._dim}",
                        pair_id=pair_id)
                out.append(vec)
        return out


@dataclass
class UseScoreResult:
    per_pair: list[dict]  # {"id", "score"}
    mean: float
    backend_id: str = ""


def use_score(predictions: EvalCorpus, references: EvalCorpus, backend,
              reference_backend=None) -> UseScoreResult:
    """Cosine of (prediction embedding, reference embedding) per id, and the mean.

    With a text-embedding backend one instance serves both sides; with
    precomputed-vector files pass a second backend for the reference side,
    since both sides share ids and the "summary" kind.
    """
    pred_ids = set(predictions.ids())
    ref_ids = set(references.ids())
    if pred_ids != ref_ids:
        raise IdMismatchError(pred_ids - ref_ids, ref_ids - pred_ids)
    ref_backend = reference_backend if reference_backend is not None else backend

    ref_by_id = references.by_id()
    pred_items = [(p.id, p.comment) for p in predictions.pairs]
    ref_items = [(p.id, ref_by_id[p.id].comment) for p in predictions.pairs]
    pred_vecs = backend.embed("summary", pred_items)
    ref_vecs = ref_backend.embed("summary", ref_items)

    per_pair = []
    for pair, u, v in zip(predictions.pairs, pred_vecs, ref_vecs):
        try:
            score = cosine_similarity(u, v)
        except ValueError as exc:
            raise BackendFailure(str(exc), pair_id=pair.id)
        per_pair.append({"id": pair.id, "score": score})
    n = len(per_pair)
    mean = math.fsum(p["score"] for p in per_pair) / n if n else 0.0
    return UseScoreResult(per_pair=per_pair, mean=mean,
                          backend_id=getattr(backend, "backend_id", ""))


def rank_of_target(similarities, target_index: int, tie_policy: str = "pessimistic") -> int:
    """1 + #strictly-greater + #ties (excluding the target itself)."""
    if tie_policy != "pessimistic":
        raise ValueError(f"unknown tie policy: {tie_policy!r}")
    scores = list(similarities)
    if not 0 <= target_index < len(scores):
        raise ValueError("target_index out of range")
    target = scores[target_index]
    rank = 1
    for j, s in enumerate(scores):
        if j != target_index and s >= target:
            rank += 1
    return rank


@dataclass
class MrrResult:
    mrr: float
    batch_scores: list[float]
    ranks: list[dict]  # {"id", "rank"}
    batch_size: int
    seed: int | None = None
    dropped_batches: int = 0
    backend_id: str = ""

    def to_dict(self) -> dict:
        return {
            "mrr": self.mrr,
            "batch_scores": self.batch_scores,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "dropped_batches": self.dropped_batches,
            "backend_id": self.backend_id,
            "ranks": self.ranks,
        }


def reciprocal_rank_mean(ranks) -> float:
    """Order-independent mean of reciprocal ranks (exact fsum)."""
    ranks = list(ranks)
    return math.fsum(1.0 / r for r in ranks) / len(ranks)


def _similarity_matrix(queries: np.ndarray, codes: np.ndarray, similarity: str) -> np.ndarray:
    if similarity == "inner_product":
        return queries @ codes.T
    qn = np.linalg.norm(queries, axis=1, keepdims=True)
    cn = np.linalg.norm(codes, axis=1, keepdims=True)
    if np.any(qn == 0) or np.any(cn == 0):
        raise ValueError("zero-norm vector")
    return (queries / qn) @ (codes / cn).T


def mrr(corpus: EvalCorpus, backend, batch_size: int = 1000, seed: int | None = None,
        similarity: str = "cosine", drop_partial: bool = False) -> MrrResult:
    """Partition pairs into consecutive batches; within each batch every
    comment queries all batch codes and the paired code is ranked
    pessimistically. Batch scores are means of reciprocal ranks; the final
    score is the unweighted mean over batches.

    Order follows the corpus unless a seed is given, which shuffles the
    pair order (and is recorded in the result). A trailing batch smaller
    than two pairs is dropped and counted; drop_partial discards any
    trailing short batch instead.
    """
    if similarity not in ("cosine", "inner_product"):
        raise ValueError(f"unknown similarity: {similarity!r}")
    if len(corpus) < 2:
        raise ValueError("corpus must hold at least 2 pairs")
    if batch_size < 2:
        raise ValueError("batch_size must be >= 2")

    pairs = list(corpus.pairs)
    if seed is not None:
        random.Random(seed).shuffle(pairs)

    batches = [pairs[i:i + batch_size] for i in range(0, len(pairs), batch_size)]
    dropped = 0
    if batches and len(batches[-1]) < (batch_size if drop_partial else 2):
        batches.pop()
        dropped += 1

    batch_scores: list[float] = []
    all_ranks: list[dict] = []
    for batch in batches:
        query_vecs = backend.embed("comment_query", [(p.id, p.comment) for p in batch])
        code_vecs = backend.embed("code", [(p.id, p.code) for p in batch])
        queries = np.stack([_values(v) for v in query_vecs])
        codes = np.stack([_values(v) for v in code_vecs])
        if queries.shape[1] != codes.shape[1]:
            raise BackendFailure(
                f"query/code dimension mismatch: {queries.shape[1]} vs {codes.shape[1]}",
                pair_id=batch[0].id)
        sims = _similarity_matrix(queries, codes, similarity)
        ranks = []
        for i in range(len(batch)):
            row = sims[i]
            target = row[i]
            rank = 1 + int(np.sum(row > target)) + int(np.sum(row == target) - 1)
            ranks.append(rank)
            all_ranks.append({"id": batch[i].id, "rank": rank})
        batch_scores.append(reciprocal_rank_mean(ranks))

    if not batch_scores:
        raise ValueError("no batch with at least 2 pairs")
    return MrrResult(
        mrr=math.fsum(batch_scores) / len(batch_scores),
        batch_scores=batch_scores,
        ranks=all_ranks,
        batch_size=batch_size,
        seed=seed,
        dropped_batches=dropped,
        backend_id=getattr(backend, "backend_id", ""),
    )
