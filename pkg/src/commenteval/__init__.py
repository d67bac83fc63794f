"""Code-comment quality toolkit.

Reference-based metrics (BLEU, ROUGE-L, METEOR, exact match, embedding
similarity), reference-free metrics (inconsistency rate, retrieval MRR),
inconsistency dataset construction from commit pairs, LLM-driven corpus
rebuilding with caching and cost accounting, and the double-rater human
evaluation protocol with its HTTP service.
"""

__version__ = "0.1.0"

from .ccid import (
    CcidExample,
    CommitPairSample,
    IncRateResult,
    build_ccid_dataset,
    classify_pair,
    inc_rate,
)
from .corpus import (
    CodeCommentPair,
    CorpusStats,
    EvalCorpus,
    FieldMapping,
    corpus_stats,
    ingest_jsonl,
    write_jsonl,
)
from .errors import BackendFailure, CommentEvalError, IdMismatchError
from .humaneval import (
    AnnotationTask,
    FinalScore,
    Rating,
    RatingProtocol,
    aggregate_humaneval,
    build_assignments,
    draw_sample,
    resolve_scores,
    sample_size,
)
from .ngram_metrics import (
    RefMetricReport,
    TokenSeq,
    bleu,
    corpus_bleu,
    evaluate_reference_based,
    exact_match,
    meteor,
    rouge_l,
    tokenize,
)
from .rebuild import (
    ChatCompletionsClient,
    GenerationParams,
    PriceTable,
    PromptTemplate,
    RebuildRecord,
    ResponseCache,
    estimate_cost,
    generate_comment,
    postprocess_comment,
    rebuild_corpus,
    render_prompt,
)
from .semantic_metrics import (
    EmbeddingVector,
    HttpEmbeddingBackend,
    MrrResult,
    VectorFileBackend,
    cosine_similarity,
    mrr,
    rank_of_target,
    use_score,
)
