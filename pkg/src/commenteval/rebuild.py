"""Comment rebuild pipeline: prompt rendering, a chat-completions client
with retry and on-disk caching, corpus-scale fan-out, and cost accounting.

The output corpus keeps ids, languages, code bytes, and splits; only the
comment and the source tag change.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from math import fsum
from pathlib import Path

import requests

from .corpus import CodeCommentPair, EvalCorpus, model_source
from .errors import CommentEvalError, RebuildAborted

DEFAULT_PROMPT_TEMPLATE = (
    "You are an expert [PL] programmer. For the given [PL] method, "
    "please write a one-sentence description as comment: [Code Snippet Content]"
)

LANGUAGE_DISPLAY = {
    "java": "Java",
    "python": "Python",
    "php": "PHP",
    "javascript": "JavaScript",
    "go": "Go",
    "ruby": "Ruby",
}

_CODE_PLACEHOLDER = "[Code Snippet Content]"
_PL_PLACEHOLDER = "[PL]"


def language_display(language: str) -> str:
    tag = language.strip()
    return LANGUAGE_DISPLAY.get(tag.lower(), tag.capitalize())


@dataclass(frozen=True)
class PromptTemplate:
    text: str = DEFAULT_PROMPT_TEMPLATE

    def __post_init__(self):
        if self.text.count(_CODE_PLACEHOLDER) != 1:
            raise CommentEvalError(
                f"template must contain {_CODE_PLACEHOLDER!r} exactly once")
        if _PL_PLACEHOLDER not in self.text:
            raise CommentEvalError(f"template must contain {_PL_PLACEHOLDER!r}")

    def render(self, language: str, code: str) -> str:
        if not code:
            raise CommentEvalError("code must be non-empty")
        return (self.text
                .replace(_PL_PLACEHOLDER, language_display(language))
                .replace(_CODE_PLACEHOLDER, code))


def render_prompt(language: str, code: str, template: PromptTemplate | None = None) -> str:
    """Substitute the language display name and the code snippet; nothing
    else in the template text is touched."""
    return (template or PromptTemplate()).render(language, code)


@dataclass(frozen=True)
class GenerationParams:
    model: str
    max_tokens: int = 30
    top_p: float = 1.0
    temperature: float = 1.0

    def __post_init__(self):
        if self.max_tokens < 1:
            raise CommentEvalError("max_tokens must be >= 1")
        if not 0 < self.top_p <= 1:
            raise CommentEvalError("top_p must be in (0, 1]")
        if self.temperature < 0:
            raise CommentEvalError("temperature must be >= 0")


@dataclass(frozen=True)
class PriceTable:
    """Prices are per 1M tokens."""

    input_per_million: float = 0.0
    output_per_million: float = 0.0

    def cost(self, prompt_tokens: int, completion_tokens: int) -> float:
        return (prompt_tokens * self.input_per_million
                + completion_tokens * self.output_per_million) / 1e6


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass
class RebuildRecord:
    pair_id: str
    original_comment: str
    generated_comment: str
    raw_response: str
    usage: Usage
    cost: float
    attempts: int
    cached: bool
    empty_output: bool = False


_COMMENT_MARKERS = ("///", "//", "/**", "/*", "#", "*")
_QUOTES = ('"""', "'''", '"', "'", "`")


def postprocess_comment(raw: str) -> str:
    """Strip comment markers and surrounding quotes, collapse whitespace.

    Output is empty only when the raw text held no word characters; the
    caller flags that case on the record.
    """
    text = raw.strip()
    for quote in _QUOTES:
        if len(text) >= 2 * len(quote) and text.startswith(quote) and text.endswith(quote):
            text = text[len(quote):-len(quote)].strip()
            break
    pieces = []
    for line in text.splitlines():
        s = line.strip()
        if s.endswith("*/"):
            s = s[:-2].strip()
        for marker in _COMMENT_MARKERS:
            if s.startswith(marker):
                s = s[len(marker):].strip()
                break
        pieces.append(s)
    return " ".join(" ".join(pieces).split())


class ResponseCache:
    """Content-addressed on-disk cache with atomic write-then-rename."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(model: str, prompt: str, max_tokens: int, top_p: float,
            temperature: float) -> str:
        payload = json.dumps({
            "model": model,
            "prompt": prompt,
            "max_tokens": max_tokens,
            "top_p": top_p,
            "temperature": temperature,
        }, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> dict | None:
        path = self._path(key)
        try:
            with open(path, encoding="utf-8") as fh:
                return json.load(fh)
        except FileNotFoundError:
            return None
        except (json.JSONDecodeError, OSError):
            return None  # torn write from a crashed run; treat as a miss

    def put(self, key: str, value: dict):
        path = self._path(key)
        tmp = path.with_suffix(f".tmp-{os.getpid()}-{threading.get_ident()}")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(value, fh, ensure_ascii=False)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def delete(self, key: str):
        try:
            os.unlink(self._path(key))
        except FileNotFoundError:
            pass


class TokenBucket:
    """Requests-per-minute limiter shared across worker threads."""

    def __init__(self, per_minute: float):
        self.rate = per_minute / 60.0
        self.capacity = max(1.0, per_minute / 60.0)
        self._tokens = self.capacity
        self._stamp = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self):
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._stamp) * self.rate)
                self._stamp = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                needed = (1.0 - self._tokens) / self.rate
            time.sleep(needed)


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 4
    base_delay: float = 0.5
    max_delay: float = 30.0

    def delay(self, attempt: int, retry_after: float | None = None) -> float:
        if retry_after is not None:
            return min(retry_after, self.max_delay)
        return min(self.base_delay * (2 ** (attempt - 1)), self.max_delay)


class ApiError(CommentEvalError):
    def __init__(self, message: str, status: int | None = None, permanent: bool = False):
        self.status = status
        self.permanent = permanent
        super().__init__(message)


class ChatCompletionsClient:
    """Client for an OpenAI-compatible POST /v1/chat/completions endpoint.

    The request body carries exactly {model, messages, max_tokens, top_p,
    temperature}; the prompt travels as a single user message. Transient
    failures (429 and 5xx) are retried with exponential backoff, honoring
    Retry-After; other 4xx responses are permanent.
    """

    def __init__(self, endpoint: str, api_key: str | None = None, timeout: float = 60.0,
                 retry: RetryPolicy | None = None, rate_limit_rpm: float | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout
        self.retry = retry or RetryPolicy()
        self._bucket = TokenBucket(rate_limit_rpm) if rate_limit_rpm else None
        self._local = threading.local()

    def _session(self) -> requests.Session:
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            self._local.session = session
        return session

    def complete(self, prompt: str, params: GenerationParams) -> tuple[str, Usage, str, int]:
        """Returns (content, usage, raw response text, attempts)."""
        body = {
            "model": params.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": params.max_tokens,
            "top_p": params.top_p,
            "temperature": params.temperature,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error = "request not attempted"
        for attempt in range(1, self.retry.max_attempts + 1):
            if self._bucket is not None:
                self._bucket.acquire()
            try:
                resp = self._session().post(
                    f"{self.endpoint}/v1/chat/completions",
                    json=body, headers=headers, timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = f"connection error: {exc}"
                if attempt < self.retry.max_attempts:
                    time.sleep(self.retry.delay(attempt))
                continue

            if resp.status_code == 200:
                payload = resp.json()
                try:
                    content = payload["choices"][0]["message"]["content"]
                except (KeyError, IndexError, TypeError):
                    raise ApiError("malformed completion response", status=200,
                                   permanent=True)
                usage = payload.get("usage") or {}
                return (
                    content,
                    Usage(
                        prompt_tokens=int(usage.get("prompt_tokens", 0)),
                        completion_tokens=int(usage.get("completion_tokens", 0)),
                    ),
                    resp.text,
                    attempt,
                )

            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = f"transient API error {resp.status_code}"
                if attempt < self.retry.max_attempts:
                    retry_after = None
                    header = resp.headers.get("Retry-After")
                    if header is not None:
                        try:
                            retry_after = float(header)
                        except ValueError:
                            retry_after = None
                    time.sleep(self.retry.delay(attempt, retry_after))
                continue

            raise ApiError(f"permanent API error {resp.status_code}: {resp.text[:200]}",
                           status=resp.status_code, permanent=True)

        raise ApiError(f"retries exhausted after {self.retry.max_attempts} attempts: "
                       f"{last_error}")


def generate_comment(pair: CodeCommentPair, params: GenerationParams,
                     client: ChatCompletionsClient, cache: ResponseCache,
                     price_table: PriceTable | None = None,
                     template: PromptTemplate | None = None) -> RebuildRecord:
    """One pair through the prompt -> request -> postprocess path.

    The cache key hashes (model, rendered prompt, max_tokens, top_p,
    temperature); a hit short-circuits the network entirely and reports
    attempts=0. Cost is always computed from the active price table.
    """
    prices = price_table or PriceTable()
    prompt = render_prompt(pair.language, pair.code, template)
    key = ResponseCache.key(params.model, prompt, params.max_tokens,
                            params.top_p, params.temperature)
    hit = cache.get(key)
    if hit is not None:
        usage = Usage(hit["prompt_tokens"], hit["completion_tokens"])
        comment = hit["generated_comment"]
        return RebuildRecord(
            pair_id=pair.id,
            original_comment=pair.comment,
            generated_comment=comment,
            raw_response=hit.get("raw_response", ""),
            usage=usage,
            cost=prices.cost(usage.prompt_tokens, usage.completion_tokens),
            attempts=0,
            cached=True,
            empty_output=not comment,
        )

    content, usage, raw, attempts = client.complete(prompt, params)
    comment = postprocess_comment(content)
    cache.put(key, {
        "generated_comment": comment,
        "prompt_tokens": usage.prompt_tokens,
        "completion_tokens": usage.completion_tokens,
        "raw_response": raw,
        "model": params.model,
    })
    return RebuildRecord(
        pair_id=pair.id,
        original_comment=pair.comment,
        generated_comment=comment,
        raw_response=raw,
        usage=usage,
        cost=prices.cost(usage.prompt_tokens, usage.completion_tokens),
        attempts=attempts,
        cached=False,
        empty_output=not comment,
    )


@dataclass
class CostReport:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    total_cost: float = 0.0
    network_calls: int = 0
    cache_hits: int = 0

    def to_dict(self) -> dict:
        return {
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "total_cost": self.total_cost,
            "network_calls": self.network_calls,
            "cache_hits": self.cache_hits,
        }


@dataclass(frozen=True)
class RebuildFailure:
    pair_id: str
    error: str


@dataclass
class RebuildResult:
    corpus: EvalCorpus
    records: list[RebuildRecord]
    cost: CostReport
    failures: list[RebuildFailure] = field(default_factory=list)


def rebuild_corpus(corpus: EvalCorpus, params: GenerationParams,
                   client: ChatCompletionsClient, cache: ResponseCache,
                   max_in_flight: int = 4, price_table: PriceTable | None = None,
                   template: PromptTemplate | None = None,
                   failure_threshold: float = 0.1) -> RebuildResult:
    """Fan generate_comment out over a bounded worker pool.

    Failed pairs are excluded from the output corpus and listed; once the
    failure fraction crosses the threshold the run aborts. Reruns with a
    warm cache only touch the network for missing records.
    """
    if max_in_flight < 1:
        raise CommentEvalError("max_in_flight must be >= 1")
    pairs = list(corpus.pairs)
    records: dict[str, RebuildRecord] = {}
    failures: list[RebuildFailure] = []
    allowed_failures = int(failure_threshold * len(pairs))

    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        pending = {
            pool.submit(generate_comment, pair, params, client, cache,
                        price_table, template): pair
            for pair in pairs
        }
        aborted = False
        while pending:
            done, _ = wait(pending, return_when=FIRST_COMPLETED)
            for future in done:
                pair = pending.pop(future)
                try:
                    records[pair.id] = future.result()
                except CommentEvalError as exc:
                    failures.append(RebuildFailure(pair.id, str(exc)))
            if len(failures) > allowed_failures:
                aborted = True
                for future in pending:
                    future.cancel()
                break
        if aborted:
            raise RebuildAborted(
                f"{len(failures)} failures exceeded the threshold "
                f"({failure_threshold:.0%} of {len(pairs)})", failures)

    out_pairs = []
    cost = CostReport()
    ordered_records = []
    for pair in pairs:
        record = records.get(pair.id)
        if record is None:
            continue
        ordered_records.append(record)
        cost.prompt_tokens += record.usage.prompt_tokens
        cost.completion_tokens += record.usage.completion_tokens
        if record.cached:
            cost.cache_hits += 1
        else:
            cost.network_calls += 1
        out_pairs.append(CodeCommentPair(
            id=pair.id,
            language=pair.language,
            code=pair.code,
            comment=record.generated_comment,
            source=model_source(params.model),
            split=pair.split,
        ))
    cost.total_cost = fsum(r.cost for r in ordered_records)

    name = f"{corpus.name}-rebuilt" if corpus.name else "rebuilt"
    return RebuildResult(
        corpus=EvalCorpus(out_pairs, name=name),
        records=ordered_records,
        cost=cost,
        failures=failures,
    )


def estimate_cost(corpus: EvalCorpus, params: GenerationParams,
                  price_table: PriceTable, token_estimator=None,
                  template: PromptTemplate | None = None) -> float:
    """Upper-bound style estimate: estimated prompt tokens at the input
    price plus max_tokens at the output price, summed over pairs. The
    default token estimator is len(prompt) // 4."""
    estimator = token_estimator or (lambda text: len(text) // 4)
    total = 0.0
    for pair in corpus.pairs:
        prompt = render_prompt(pair.language, pair.code, template)
        total += price_table.cost(estimator(prompt), params.max_tokens)
    return total


@dataclass
class RebuildConfig:
    """Schema of the rebuild config file (JSON object)."""

    endpoint: str
    model: str
    credential_env: str | None = None  # env var holding the API key
    max_tokens: int = 30
    top_p: float = 1.0
    temperature: float = 1.0
    price_input_per_million: float = 0.0
    price_output_per_million: float = 0.0
    max_in_flight: int = 4
    max_attempts: int = 4
    base_delay: float = 0.5
    rate_limit_rpm: float | None = None
    failure_threshold: float = 0.1
    timeout: float = 60.0

    @classmethod
    def load(cls, path) -> "RebuildConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        unknown = set(raw) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise CommentEvalError(f"unknown config keys: {sorted(unknown)}")
        if "endpoint" not in raw or "model" not in raw:
            raise CommentEvalError("config must set 'endpoint' and 'model'")
        return cls(**raw)

    def params(self) -> GenerationParams:
        return GenerationParams(model=self.model, max_tokens=self.max_tokens,
                                top_p=self.top_p, temperature=self.temperature)

    def prices(self) -> PriceTable:
        return PriceTable(self.price_input_per_million, self.price_output_per_million)

    def client(self) -> ChatCompletionsClient:
        api_key = os.environ.get(self.credential_env) if self.credential_env else None
        return ChatCompletionsClient(
            endpoint=self.endpoint,
            api_key=api_key,
            timeout=self.timeout,
            retry=RetryPolicy(max_attempts=self.max_attempts, base_delay=self.base_delay),
            rate_limit_rpm=self.rate_limit_rpm,
        )


def write_rebuild_outputs(result: RebuildResult, out_path) -> dict[str, Path]:
    """Rebuilt corpus at out_path; cost report and failure ledger as siblings."""
    from .corpus import write_jsonl

    out_path = Path(out_path)
    paths = {"corpus": write_jsonl(result.corpus, out_path)}
    cost_path = Path(str(out_path) + ".cost.json")
    with open(cost_path, "w", encoding="utf-8") as fh:
        json.dump(result.cost.to_dict(), fh, indent=2)
        fh.write("\n")
    paths["cost"] = cost_path
    failure_path = Path(str(out_path) + ".failures")
    with open(failure_path, "w", encoding="utf-8") as fh:
        for failure in result.failures:
            fh.write(json.dumps({"id": failure.pair_id, "error": failure.error}) + "\n")
    paths["failures"] = failure_path
    return paths
