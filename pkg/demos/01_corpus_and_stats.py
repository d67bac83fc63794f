"""Walk through corpus ingestion and descriptive statistics.

Builds a small line-delimited corpus on disk (with one deliberately broken
line), ingests it leniently, and prints the stats table.
"""

import json
import tempfile
from pathlib import Path

from commenteval import corpus_stats, ingest_jsonl, write_jsonl

workdir = Path(tempfile.mkdtemp(prefix="commenteval-demo-"))
raw = workdir / "raw.jsonl"

records = [
    {"id": "j1", "language": "java", "code": "int add(int a,int b){return a+b;}",
     "docstring": "Adds two integers."},
    {"id": "j2", "language": "java", "code": "void clear(){list.clear();}",
     "docstring": "Removes every element from the list."},
    {"id": "p1", "language": "python", "code": "def top(): return heap[0]",
     "docstring": "Return the smallest element without popping it."},
]
with open(raw, "w", encoding="utf-8") as fh:
    for record in records[:2]:
        fh.write(json.dumps(record) + "\n")
    fh.write("this line is not a record\n")  # noise survives lenient ingestion
    fh.write(json.dumps(records[2]) + "\n")

result = ingest_jsonl(raw)
print(f"ingested {len(result.corpus)} pairs from {raw}")
for issue in result.errors:
    print(f"  skipped line {issue.line_no}: {issue.message}")

stats = corpus_stats(result.corpus)
print("\ncorpus statistics (whitespace tokens):")
print(json.dumps(stats.to_dict(), indent=2))

# the canonical format round-trips
out = write_jsonl(result.corpus, workdir / "canonical.jsonl")
again = ingest_jsonl(out).corpus
assert again.pairs == result.corpus.pairs
print(f"\nround-trip through {out} preserved all pairs")
