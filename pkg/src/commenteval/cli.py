"""Single entry point: every pipeline stage as a subcommand.

Offline subcommands are reproducible: identical (config, inputs, seeds)
produce byte-identical outputs, and every run that writes an output also
writes a "<out>.manifest.json" describing it.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path
from statistics import NormalDist

from . import __version__
from .ccid import (
    HttpClassifierBackend,
    VerdictFileBackend,
    build_ccid_dataset,
    inc_rate,
    read_commit_pairs,
    write_ccid_dataset,
)
from .corpus import (
    MAPPINGS,
    FieldMapping,
    corpus_stats,
    ingest_jsonl,
    write_error_ledger,
    write_jsonl,
)
from .errors import CommentEvalError
from .humaneval import build_assignments, draw_sample, humaneval_summary_table, sample_size
from .ngram_metrics import evaluate_reference_based, read_report, summary_table, write_report
from .rebuild import RebuildConfig, ResponseCache, estimate_cost, rebuild_corpus, write_rebuild_outputs
from .semantic_metrics import HttpEmbeddingBackend, VectorFileBackend, mrr, use_score
from .service import AnnotationService, create_app, load_assignments, save_assignments

# conventional two-decimal z-scores; other levels fall back to the normal quantile
Z_TABLE = {0.90: 1.645, 0.95: 1.96, 0.99: 2.576}


def z_for_confidence(confidence: float) -> float:
    if not 0 < confidence < 1:
        raise CommentEvalError("confidence must be in (0, 1)")
    if confidence in Z_TABLE:
        return Z_TABLE[confidence]
    return NormalDist().inv_cdf(1 - (1 - confidence) / 2)


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(out_path, subcommand: str, config: dict, inputs: list,
                   seeds: dict | None = None) -> Path:
    effective = json.dumps(config, sort_keys=True, default=str)
    manifest = {
        "subcommand": subcommand,
        "tool_version": __version__,
        "config": config,
        "config_hash": hashlib.sha256(effective.encode("utf-8")).hexdigest(),
        "inputs": {str(p): _sha256_file(p) for p in inputs if p and Path(p).exists()},
        "seeds": seeds or {},
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    path = Path(str(out_path) + ".manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")
    return path


def _mapping_from_arg(value: str) -> FieldMapping:
    if value in MAPPINGS:
        return MAPPINGS[value]
    try:
        raw = json.loads(value)
    except json.JSONDecodeError:
        raise CommentEvalError(
            f"--mapping must be one of {sorted(MAPPINGS)} or a JSON object")
    return FieldMapping(**raw)


def _load_corpus(path, strict: bool = False):
    result = ingest_jsonl(path, strict=strict)
    return result.corpus


def _embedding_backend(args):
    if getattr(args, "vectors", None):
        return VectorFileBackend(args.vectors)
    if getattr(args, "endpoint", None):
        return HttpEmbeddingBackend(args.endpoint)
    raise CommentEvalError("need --vectors FILE or --endpoint URL")


def _classifier_backend(args):
    if getattr(args, "verdicts", None):
        return VerdictFileBackend(args.verdicts)
    if getattr(args, "endpoint", None):
        return HttpClassifierBackend(args.endpoint)
    raise CommentEvalError("need --verdicts FILE or --endpoint URL")


def cmd_ingest(args) -> int:
    mapping = _mapping_from_arg(args.mapping)
    result = ingest_jsonl(args.infile, mapping=mapping, strict=args.strict,
                          name=args.name)
    write_jsonl(result.corpus, args.out)
    ledger = write_error_ledger(result.errors, args.infile)
    write_manifest(args.out, "ingest",
                   {"mapping": args.mapping, "strict": args.strict,
                    "name": result.corpus.name},
                   [args.infile])
    print(f"ingested {len(result.corpus)} pairs, {len(result.errors)} errors "
          f"(ledger: {ledger})")
    return 0


def cmd_stats(args) -> int:
    stats = corpus_stats(_load_corpus(args.infile))
    rendered = json.dumps(stats.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(rendered + "\n", encoding="utf-8")
        write_manifest(args.out, "stats", {}, [args.infile])
    print(rendered)
    return 0


def cmd_eval_ref(args) -> int:
    predictions = _load_corpus(args.pred)
    references = _load_corpus(args.ref)
    report = evaluate_reference_based(predictions, references, tokenizer=args.tokenizer)
    if args.out:
        write_report(report, args.out)
        write_manifest(args.out, "eval-ref", {"tokenizer": args.tokenizer},
                       [args.pred, args.ref])
    print(summary_table(report))
    return 0


def cmd_eval_use(args) -> int:
    predictions = _load_corpus(args.pred)
    references = _load_corpus(args.ref)
    backend = _embedding_backend(args)
    ref_backend = VectorFileBackend(args.ref_vectors) if args.ref_vectors else None
    result = use_score(predictions, references, backend, reference_backend=ref_backend)
    payload = {"mean": result.mean, "backend_id": result.backend_id,
               "per_pair": result.per_pair}
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        write_manifest(args.out, "eval-use", {"backend": result.backend_id},
                       [args.pred, args.ref, args.vectors, args.ref_vectors])
    print(f"mean USE similarity: {result.mean:.4f} over {len(result.per_pair)} pairs")
    return 0


def cmd_eval_mrr(args) -> int:
    corpus = _load_corpus(args.infile)
    backend = _embedding_backend(args)
    result = mrr(corpus, backend, batch_size=args.batch_size, seed=args.seed,
                 similarity=args.similarity, drop_partial=args.drop_partial)
    if args.out:
        Path(args.out).write_text(json.dumps(result.to_dict(), indent=2) + "\n",
                                  encoding="utf-8")
        write_manifest(args.out, "eval-mrr",
                       {"batch_size": args.batch_size, "similarity": args.similarity,
                        "drop_partial": args.drop_partial},
                       [args.infile, args.vectors], seeds={"shuffle": args.seed})
    print(f"MRR: {result.mrr:.4f} over {len(result.batch_scores)} batch(es)"
          + (f", {result.dropped_batches} dropped" if result.dropped_batches else ""))
    return 0


def cmd_eval_incrate(args) -> int:
    corpus = _load_corpus(args.infile)
    backend = _classifier_backend(args)
    result = inc_rate(corpus, backend)
    if args.out:
        Path(args.out).write_text(json.dumps(result.to_dict(), indent=2) + "\n",
                                  encoding="utf-8")
        write_manifest(args.out, "eval-incrate", {"backend": result.backend_id},
                       [args.infile, args.verdicts])
    print(f"inconsistency rate: {result.inc_rate:.4f} "
          f"({len(result.flagged_ids)}/{result.total})")
    return 0


def cmd_ccid_build(args) -> int:
    samples = read_commit_pairs(args.infile)
    examples = build_ccid_dataset(samples,
                                  emit_changed_consistent=args.emit_changed_consistent)
    write_ccid_dataset(examples, args.out)
    write_manifest(args.out, "ccid-build",
                   {"emit_changed_consistent": args.emit_changed_consistent},
                   [args.infile])
    inconsistent = sum(1 for e in examples if e.label == "inconsistent")
    print(f"built {len(examples)} examples ({inconsistent} inconsistent) "
          f"from {len(samples)} commit pairs")
    return 0


def cmd_rebuild(args) -> int:
    config = RebuildConfig.load(args.config)
    if args.max_in_flight is not None:
        config.max_in_flight = args.max_in_flight
    corpus = _load_corpus(args.infile)
    cache = ResponseCache(args.cache or (str(args.out) + ".cache"))
    result = rebuild_corpus(
        corpus,
        config.params(),
        config.client(),
        cache,
        max_in_flight=config.max_in_flight,
        price_table=config.prices(),
        failure_threshold=config.failure_threshold,
    )
    paths = write_rebuild_outputs(result, args.out)
    effective = {k: v for k, v in vars(config).items() if k != "credential_env"}
    write_manifest(args.out, "rebuild", effective, [args.infile, args.config])
    print(f"rebuilt {len(result.corpus)} pairs "
          f"({result.cost.network_calls} calls, {result.cost.cache_hits} cache hits, "
          f"{len(result.failures)} failures); cost ${result.cost.total_cost:.6f}")
    print(f"outputs: {paths['corpus']}, {paths['cost']}, {paths['failures']}")
    return 0


def cmd_estimate_cost(args) -> int:
    config = RebuildConfig.load(args.config)
    corpus = _load_corpus(args.infile)
    estimate = estimate_cost(corpus, config.params(), config.prices())
    print(f"estimated cost for {len(corpus)} pairs: ${estimate:.6f}")
    return 0


def cmd_sample(args) -> int:
    if args.infile:
        population = len(_load_corpus(args.infile))
    elif args.n is not None:
        population = args.n
    else:
        raise CommentEvalError("need --n or --in")
    z = args.z if args.z is not None else z_for_confidence(args.confidence)
    size = sample_size(population, z=z, e=args.margin, p=args.proportion)
    print(size)
    if args.draw:
        if not args.infile:
            raise CommentEvalError("--draw needs --in CORPUS")
        ids = draw_sample(_load_corpus(args.infile), size, args.seed)
        if args.out:
            Path(args.out).write_text("\n".join(ids) + "\n", encoding="utf-8")
            write_manifest(args.out, "sample",
                           {"n": population, "z": z, "margin": args.margin,
                            "proportion": args.proportion, "size": size},
                           [args.infile], seeds={"sample": args.seed})
        else:
            for snippet_id in ids:
                print(snippet_id)
    return 0


def cmd_assign(args) -> int:
    snippets = [line.strip() for line in
                Path(args.snippets).read_text(encoding="utf-8").splitlines()
                if line.strip()]
    systems = [s.strip() for s in args.systems.split(",") if s.strip()]
    raters = [r.strip() for r in args.raters.split(",") if r.strip()]

    content = None
    if args.comments:
        corpora = {}
        for spec_item in args.comments:
            system_id, _, path = spec_item.partition("=")
            if not path:
                raise CommentEvalError("--comments expects SYSTEM=corpus.jsonl")
            corpora[system_id] = _load_corpus(path).by_id()
        missing = set(systems) - set(corpora)
        if missing:
            raise CommentEvalError(f"no --comments corpus for systems: {sorted(missing)}")

        def content(snippet_id, system_id):
            pair = corpora[system_id].get(snippet_id)
            if pair is None:
                raise CommentEvalError(
                    f"snippet {snippet_id!r} missing from corpus of {system_id!r}")
            return pair.code, pair.comment

    assignments = build_assignments(snippets, systems, raters,
                                    raters_per_item=args.raters_per_item,
                                    seed=args.seed, content=content)
    save_assignments(assignments, args.out)
    write_manifest(args.out, "assign",
                   {"systems": systems, "raters": raters,
                    "raters_per_item": args.raters_per_item},
                   [args.snippets], seeds={"assignment": args.seed})
    print(f"wrote {len(assignments.tasks)} tasks for {len(snippets)} snippets "
          f"x {len(systems)} systems to {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    service = AnnotationService(load_assignments(args.assignments), args.log)
    app = create_app(service, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_export(args) -> int:
    service = AnnotationService(load_assignments(args.assignments), args.log)
    try:
        payload = service.export_jsonl()
        if args.out:
            Path(args.out).write_text(payload, encoding="utf-8")
            write_manifest(args.out, "export", {}, [args.assignments, args.log])
            print(f"wrote export to {args.out}")
        else:
            sys.stdout.write(payload)
        if args.summary:
            print(humaneval_summary_table(service.aggregate()))
    finally:
        service.close()
    return 0


def cmd_report(args) -> int:
    print(summary_table(read_report(args.infile)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commenteval",
        description="Code-comment quality metrics, dataset tooling, and the "
                    "annotation service.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ingest", help="normalize a record file into the canonical corpus format")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mapping", default="canonical",
                   help="'canonical', 'csn', or a JSON field-mapping object")
    p.add_argument("--strict", action="store_true", help="abort on the first bad line")
    p.add_argument("--name", default=None, help="corpus name (default: file stem)")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("stats", help="descriptive corpus statistics")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("eval-ref", help="BLEU / ROUGE-L / METEOR / exact match")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--tokenizer", default="default")
    p.set_defaults(fn=cmd_eval_ref)

    p = sub.add_parser("eval-use", help="embedding similarity against references")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--vectors", default=None, help="precomputed vectors for predictions")
    p.add_argument("--ref-vectors", default=None, help="precomputed vectors for references")
    p.add_argument("--endpoint", default=None, help="embedding sidecar base URL")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_eval_use)

    p = sub.add_parser("eval-mrr", help="reference-free retrieval score")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--vectors", default=None)
    p.add_argument("--endpoint", default=None)
    p.add_argument("--batch-size", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None, help="shuffle pair order")
    p.add_argument("--similarity", choices=["cosine", "inner_product"], default="cosine")
    p.add_argument("--drop-partial", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_eval_mrr)

    p = sub.add_parser("eval-incrate", help="reference-free inconsistency rate")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--verdicts", default=None)
    p.add_argument("--endpoint", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_eval_incrate)

    p = sub.add_parser("ccid-build", help="build an inconsistency dataset from commit pairs")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--emit-changed-consistent", action="store_true")
    p.set_defaults(fn=cmd_ccid_build)

    p = sub.add_parser("rebuild", help="regenerate comments through a chat endpoint")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cache", default=None)
    p.add_argument("--max-in-flight", type=int, default=None)
    p.set_defaults(fn=cmd_rebuild)

    p = sub.add_parser("estimate-cost", help="price a rebuild before running it")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_estimate_cost)

    p = sub.add_parser("sample", help="finite-population sample size (and optional draw)")
    p.add_argument("--n", type=int, default=None, help="population size")
    p.add_argument("--in", dest="infile", default=None, help="corpus (population = size)")
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--z", type=float, default=None, help="explicit z-score")
    p.add_argument("--margin", type=float, default=0.05)
    p.add_argument("--proportion", type=float, default=0.5)
    p.add_argument("--draw", action="store_true", help="draw the sample ids")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("assign", help="build blinded double-rater assignments")
    p.add_argument("--snippets", required=True, help="file of snippet ids, one per line")
    p.add_argument("--systems", required=True, help="comma-separated system ids")
    p.add_argument("--raters", required=True, help="comma-separated rater ids")
    p.add_argument("--raters-per-item", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--comments", action="append", default=None,
                   metavar="SYSTEM=CORPUS",
                   help="corpus with each system's comments (repeatable)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_assign)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--assignments", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui", default=None, help="directory with the rater UI bundle")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("export", help="export final scores from an annotation log")
    p.add_argument("--assignments", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--summary", action="store_true")
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("report", help="print the summary table of a metrics report")
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(fn=cmd_report)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CommentEvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
