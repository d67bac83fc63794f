"""Score predicted comments against references with the n-gram battery.

Shows the individual metrics on a single pair, then the corpus-level
report with both BLEU pooling modes.
"""

from commenteval import (
    EvalCorpus,
    CodeCommentPair,
    bleu,
    evaluate_reference_based,
    exact_match,
    meteor,
    rouge_l,
    tokenize,
)
from commenteval.ngram_metrics import summary_table

candidate = tokenize("Returns the sum of two integers.")
reference = tokenize("Return the sum of the two given integers.")
print("candidate tokens:", list(candidate))
print("reference tokens:", list(reference))
print(f"sentence BLEU (add-one): {bleu(candidate, [reference]):.4f}")
print(f"ROUGE-L:                 {rouge_l(candidate, reference):.4f}")
print(f"METEOR:                  {meteor(candidate, reference):.4f}")
print(f"exact match:             {exact_match(str(candidate), str(reference))}")


def pair(pid, comment):
    return CodeCommentPair(id=pid, language="java", code="int f(){}", comment=comment)


predictions = EvalCorpus([
    pair("m1", "Adds two numbers."),
    pair("m2", "Sorts the list in place."),
    pair("m3", "Closes the underlying stream."),
], name="model-outputs")
references = EvalCorpus([
    pair("m1", "Adds the two numbers together."),
    pair("m2", "Sorts the list in place."),
    pair("m3", "Releases the stream and its buffers."),
], name="gold")

report = evaluate_reference_based(predictions, references)
print("\nper-pair scores:")
for scores in report.per_pair:
    print(f"  {scores.id}: bleu={scores.bleu:.4f} rouge={scores.rouge_l:.4f} "
          f"meteor={scores.meteor:.4f} em={scores.exact_match}")
print("\n" + summary_table(report))
