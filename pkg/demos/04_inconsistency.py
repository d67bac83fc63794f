"""Build an inconsistency dataset from commit pairs and measure a corpus.

The construction rule: only samples whose code changed contribute. A
changed comment yields the two cross pairings as inconsistent examples; an
unchanged comment yields both same-version pairings as consistent ones.
"""

from commenteval import CodeCommentPair, EvalCorpus, build_ccid_dataset, inc_rate
from commenteval.ccid import CommitPairSample, Verdict

samples = [
    CommitPairSample(
        id="renamed-field",
        code_before="int total(){return count;}",
        code_after="int total(){return size;}",
        comment_before="Returns the count field.",
        comment_after="Returns the size field.",
    ),
    CommitPairSample(
        id="refactor-only",
        code_before="int half(int x){return x/2;}",
        code_after="int half(int x){return x >> 1;}",
        comment_before="Halves the value.",
        comment_after="Halves the value.",
    ),
    CommitPairSample(
        id="whitespace-noise",
        code_before="void ping(){}   ",
        code_after="void ping(){}",
        comment_before="Does nothing.",
        comment_after="Still does nothing.",
    ),
]

examples = build_ccid_dataset(samples)
print("constructed examples:")
for ex in examples:
    print(f"  [{ex.label:>12}] {ex.provenance.sample_id} ({ex.provenance.pairing}): "
          f"{ex.comment!r} paired with {ex.code!r}")
print("(the whitespace-only change produced nothing: code equality ignores "
      "trailing whitespace)\n")


class KeywordClassifier:
    """Stand-in for a trained classifier: flags comments naming a field the
    code no longer mentions."""

    backend_id = "demo:keyword"

    def classify(self, pairs):
        return [Verdict(p.id, "count" in p.comment and "count" not in p.code)
                for p in pairs]


corpus = EvalCorpus([
    CodeCommentPair(id=f"x{i}", language="java", code=ex.code, comment=ex.comment)
    for i, ex in enumerate(examples)
], name="ccid-demo")
result = inc_rate(corpus, KeywordClassifier())
print(f"inconsistency rate over {result.total} pairs: {result.inc_rate:.2%}")
print(f"flagged ids: {result.flagged_ids}")
