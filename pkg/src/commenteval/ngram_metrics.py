"""Reference-based textual metrics over a shared tokenizer.

BLEU is the cumulative 1..max_n-gram score with brevity penalty, ROUGE-L
the LCS F-measure, METEOR the exact-unigram-matching variant with the
chunk fragmentation penalty, and exact match a trimmed string comparison.
All scores live in [0, 1].
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .corpus import EvalCorpus
from .errors import IdMismatchError

_WORD_OR_PUNCT = re.compile(r"\w+|[^\w\s]+")

TOKENIZERS = {
    # lowercase, punctuation runs detached as their own tokens
    "default": lambda text: _WORD_OR_PUNCT.findall(text.lower()),
    # bare whitespace split, no case folding (corpus-stats convention)
    "whitespace": lambda text: text.split(),
}


@dataclass(frozen=True)
class TokenSeq:
    tokens: tuple[str, ...]
    tokenizer_id: str = "default"

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


def tokenize(text: str, config: str = "default") -> TokenSeq:
    try:
        fn = TOKENIZERS[config]
    except KeyError:
        raise ValueError(f"unknown tokenizer id: {config!r}") from None
    return TokenSeq(tuple(fn(text)), config)


def _tokens(seq) -> list[str]:
    if isinstance(seq, TokenSeq):
        return list(seq.tokens)
    return list(seq)


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _clipped_matches(cand: list[str], refs: list[list[str]], n: int) -> tuple[int, int]:
    """(clipped matches, candidate n-gram total) for one order n."""
    cand_grams = _ngram_counts(cand, n)
    total = sum(cand_grams.values())
    if not cand_grams:
        return 0, 0
    max_ref: Counter = Counter()
    for ref in refs:
        for gram, count in _ngram_counts(ref, n).items():
            if count > max_ref[gram]:
                max_ref[gram] = count
    matches = sum(min(count, max_ref[gram]) for gram, count in cand_grams.items())
    return matches, total


def _effective_ref_len(cand_len: int, refs: list[list[str]]) -> int:
    """Closest reference length; ties go to the shorter reference."""
    best = None
    for ref in refs:
        rl = len(ref)
        if best is None:
            best = rl
        elif abs(rl - cand_len) < abs(best - cand_len):
            best = rl
        elif abs(rl - cand_len) == abs(best - cand_len) and rl < best:
            best = rl
    return best


def _brevity_penalty(cand_len: int, ref_len: int) -> float:
    if cand_len >= ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / cand_len)


def bleu(candidate, references, max_n: int = 4, smoothing: str = "add_one") -> float:
    """Sentence BLEU: geometric mean of clipped n-gram precisions times the
    brevity penalty exp(1 - r/c) for c < r.

    add_one smoothing adds 1 to the numerator and denominator of every
    precision; a level with no n-grams at all (candidate shorter than n)
    then contributes (0+1)/(0+1) = 1. Unsmoothed, any zero precision
    makes the score 0. An empty candidate scores 0 by convention.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    if smoothing not in ("none", "add_one"):
        raise ValueError(f"unknown smoothing: {smoothing!r}")
    refs = [_tokens(r) for r in references]
    if not refs:
        raise ValueError("at least one reference required")
    cand = _tokens(candidate)
    if not cand:
        return 0.0

    log_sum = 0.0
    for n in range(1, max_n + 1):
        matches, total = _clipped_matches(cand, refs, n)
        if smoothing == "add_one":
            precision = (matches + 1.0) / (total + 1.0)
        else:
            if matches == 0:
                return 0.0
            precision = matches / total
        log_sum += math.log(precision) / max_n
    bp = _brevity_penalty(len(cand), _effective_ref_len(len(cand), refs))
    return bp * math.exp(log_sum)


def corpus_bleu(candidates, reference_lists, max_n: int = 4) -> float:
    """Corpus BLEU: n-gram counts pooled over all pairs before the
    geometric mean; unsmoothed."""
    total_matches = [0] * max_n
    total_counts = [0] * max_n
    cand_len_sum = 0
    ref_len_sum = 0
    for candidate, references in zip(candidates, reference_lists):
        cand = _tokens(candidate)
        refs = [_tokens(r) for r in references]
        if not refs:
            raise ValueError("at least one reference required")
        cand_len_sum += len(cand)
        ref_len_sum += _effective_ref_len(len(cand), refs)
        for n in range(1, max_n + 1):
            matches, total = _clipped_matches(cand, refs, n)
            total_matches[n - 1] += matches
            total_counts[n - 1] += total
    if cand_len_sum == 0:
        return 0.0
    log_sum = 0.0
    for n in range(max_n):
        if total_matches[n] == 0 or total_counts[n] == 0:
            return 0.0
        log_sum += math.log(total_matches[n] / total_counts[n]) / max_n
    return _brevity_penalty(cand_len_sum, ref_len_sum) * math.exp(log_sum)


def _lcs_len(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[-1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate, reference, beta: float = 1.0) -> float:
    """LCS F-measure: (1+b^2)PR / (R + b^2 P) with P = LCS/|cand|, R = LCS/|ref|."""
    if beta <= 0:
        raise ValueError("beta must be > 0")
    cand = _tokens(candidate)
    ref = _tokens(reference)
    if not cand or not ref:
        return 0.0
    lcs = _lcs_len(cand, ref)
    if lcs == 0:
        return 0.0
    p = lcs / len(cand)
    r = lcs / len(ref)
    return (1 + beta * beta) * p * r / (r + beta * beta * p)


# Alignment search below keeps METEOR exact: the number of matches is
# forced word by word, but which occurrences pair up is not, and the score
# depends on the fewest chunks achievable over all maximum alignments.
# Branch-and-bound over candidate positions, seeded with a greedy
# alignment; the node cap is a safety valve for pathological repetition
# (never reached on one-sentence comments).
_ALIGN_NODE_CAP = 500_000


def _greedy_chunks(cand, ref_positions, need):
    used: set[int] = set()
    chunks = 0
    prev_j = None
    remaining = dict(need)
    for token in cand:
        j_choice = None
        if remaining.get(token, 0) > 0:
            free = [j for j in ref_positions[token] if j not in used]
            if prev_j is not None and prev_j + 1 in free:
                j_choice = prev_j + 1
            else:
                j_choice = free[0]
        if j_choice is None:
            prev_j = None
            continue
        if prev_j is None or j_choice != prev_j + 1:
            chunks += 1
        used.add(j_choice)
        remaining[token] -= 1
        prev_j = j_choice
    return chunks


def _min_chunk_alignment(cand: list[str], ref: list[str]) -> tuple[int, int]:
    """(matches, fewest chunks over all maximum exact-unigram alignments)."""
    ref_positions: dict[str, list[int]] = {}
    for j, token in enumerate(ref):
        ref_positions.setdefault(token, []).append(j)
    cand_counts = Counter(cand)
    need = {
        token: min(count, len(ref_positions[token]))
        for token, count in cand_counts.items()
        if token in ref_positions
    }
    matches = sum(need.values())
    if matches == 0:
        return 0, 0

    # candidate occurrences of each word still ahead of the cursor
    avail = dict(cand_counts)
    best = [_greedy_chunks(cand, ref_positions, need)]
    used: set[int] = set()
    remaining = dict(need)
    nodes = [0]

    def dfs(i: int, prev_j: int | None, chunks: int, matched: int):
        if chunks + (1 if matched < matches and prev_j is None else 0) >= best[0]:
            return
        if matched == matches:
            best[0] = chunks
            return
        if nodes[0] >= _ALIGN_NODE_CAP:
            return
        nodes[0] += 1
        token = cand[i]
        can_match = remaining.get(token, 0) > 0
        must_match = can_match and avail[token] <= remaining[token]
        avail[token] -= 1
        if can_match:
            free = [j for j in ref_positions[token] if j not in used]
            # explore chunk continuations first so good bounds arrive early
            if prev_j is not None and prev_j + 1 in free:
                free.remove(prev_j + 1)
                free.insert(0, prev_j + 1)
            for j in free:
                extra = 0 if (prev_j is not None and j == prev_j + 1) else 1
                used.add(j)
                remaining[token] -= 1
                dfs(i + 1, j, chunks + extra, matched + 1)
                remaining[token] += 1
                used.remove(j)
        if not must_match:
            dfs(i + 1, None, chunks, matched)
        avail[token] += 1

    dfs(0, None, 0, 0)
    return matches, best[0]


def meteor(candidate, reference) -> float:
    """Exact-unigram METEOR: Fmean = 10PR/(R+9P) damped by the chunk
    penalty 0.5*(chunks/matches)^3; 0 when nothing matches."""
    cand = _tokens(candidate)
    ref = _tokens(reference)
    if not cand or not ref:
        return 0.0
    matches, chunks = _min_chunk_alignment(cand, ref)
    if matches == 0:
        return 0.0
    p = matches / len(cand)
    r = matches / len(ref)
    fmean = 10.0 * p * r / (r + 9.0 * p)
    penalty = 0.5 * (chunks / matches) ** 3
    return fmean * (1.0 - penalty)


def exact_match(candidate: str, reference: str) -> bool:
    """True iff the raw strings are equal after trimming outer whitespace."""
    return candidate.strip() == reference.strip()


@dataclass(frozen=True)
class PairScores:
    id: str
    bleu: float
    rouge_l: float
    meteor: float
    exact_match: bool


@dataclass
class RefMetricReport:
    per_pair: list[PairScores]
    aggregate: dict
    tokenizer_id: str = "default"


def evaluate_reference_based(predictions: EvalCorpus, references: EvalCorpus,
                             tokenizer: str = "default") -> RefMetricReport:
    """Join the two corpora on id and score every pair.

    Per-pair BLEU uses add_one smoothing; the aggregate corpus_bleu pools
    n-gram counts over the whole corpus before the geometric mean.
    """
    pred_ids = set(predictions.ids())
    ref_ids = set(references.ids())
    if pred_ids != ref_ids:
        raise IdMismatchError(pred_ids - ref_ids, ref_ids - pred_ids)

    ref_by_id = references.by_id()
    per_pair = []
    cands = []
    refs = []
    for pred in predictions.pairs:
        ref = ref_by_id[pred.id]
        cand_seq = tokenize(pred.comment, tokenizer)
        ref_seq = tokenize(ref.comment, tokenizer)
        cands.append(cand_seq)
        refs.append(ref_seq)
        per_pair.append(PairScores(
            id=pred.id,
            bleu=bleu(cand_seq, [ref_seq], smoothing="add_one"),
            rouge_l=rouge_l(cand_seq, ref_seq),
            meteor=meteor(cand_seq, ref_seq),
            exact_match=exact_match(pred.comment, ref.comment),
        ))

    n = len(per_pair)
    aggregate = {
        "corpus_bleu": corpus_bleu(cands, [[r] for r in refs]) if n else 0.0,
        "mean_sentence_bleu": math.fsum(p.bleu for p in per_pair) / n if n else 0.0,
        "mean_rouge_l": math.fsum(p.rouge_l for p in per_pair) / n if n else 0.0,
        "mean_meteor": math.fsum(p.meteor for p in per_pair) / n if n else 0.0,
        "em_rate": sum(1 for p in per_pair if p.exact_match) / n if n else 0.0,
        "pair_count": n,
    }
    return RefMetricReport(per_pair=per_pair, aggregate=aggregate, tokenizer_id=tokenizer)


def write_report(report: RefMetricReport, path) -> Path:
    """One record per pair followed by a single aggregate record."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for p in report.per_pair:
            fh.write(json.dumps({
                "id": p.id,
                "bleu": p.bleu,
                "rouge_l": p.rouge_l,
                "meteor": p.meteor,
                "exact_match": p.exact_match,
            }) + "\n")
        fh.write(json.dumps({
            "aggregate": report.aggregate,
            "tokenizer_id": report.tokenizer_id,
        }) + "\n")
    return path


def read_report(path) -> RefMetricReport:
    per_pair = []
    aggregate: dict = {}
    tokenizer_id = "default"
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            if "aggregate" in record:
                aggregate = record["aggregate"]
                tokenizer_id = record.get("tokenizer_id", tokenizer_id)
            else:
                per_pair.append(PairScores(
                    id=record["id"],
                    bleu=record["bleu"],
                    rouge_l=record["rouge_l"],
                    meteor=record["meteor"],
                    exact_match=record["exact_match"],
                ))
    return RefMetricReport(per_pair=per_pair, aggregate=aggregate, tokenizer_id=tokenizer_id)


def summary_table(report: RefMetricReport) -> str:
    """Human-readable aggregate table."""
    agg = report.aggregate
    rows = [
        ("pairs", f"{agg.get('pair_count', len(report.per_pair))}"),
        ("corpus BLEU", f"{agg['corpus_bleu']:.4f}"),
        ("mean sentence BLEU", f"{agg['mean_sentence_bleu']:.4f}"),
        ("mean ROUGE-L", f"{agg['mean_rouge_l']:.4f}"),
        ("mean METEOR", f"{agg['mean_meteor']:.4f}"),
        ("exact-match rate", f"{agg['em_rate']:.4f}"),
    ]
    width = max(len(name) for name, _ in rows)
    lines = [f"{name.ljust(width)}  {value}" for name, value in rows]
    lines.append(f"{'tokenizer'.ljust(width)}  {report.tokenizer_id}")
    return "\n".join(lines)
