"""The reference-free retrieval score, step by step.

Each comment queries every code snippet in its batch; the paired snippet's
rank (pessimistic on ties) feeds a per-batch mean of reciprocal ranks, and
batch means average into the final score. Synthetic embeddings make the
ranking fully visible.
"""

import numpy as np

from commenteval import CodeCommentPair, EvalCorpus, mrr, rank_of_target

print("ranking one query against four candidates:")
similarities = [0.91, 0.80, 0.91, 0.40]
for target in range(4):
    print(f"  target {target} (sim {similarities[target]}): "
          f"rank {rank_of_target(similarities, target)}")


class PlantedRankBackend:
    """Synthetic embeddings that pin each pair's rank in advance."""

    backend_id = "demo:planted"

    def __init__(self, planted_ranks, dim):
        self.planted = planted_ranks
        self.dim = dim

    def embed(self, kind, items):
        out = []
        for pair_id, _text in items:
            i = int(pair_id[1:])
            if kind == "code":
                vec = np.zeros(self.dim)
                vec[i] = 1.0
            else:
                # with one-hot codes, sim(query, code j) is query[j] (scaled);
                # giving the paired code the k-th largest entry plants rank k
                scores = np.linspace(1.0, 0.1, self.dim)  # strictly decreasing
                k = self.planted[i] - 1
                vec = np.empty(self.dim)
                vec[i] = scores[k]
                others = [j for j in range(self.dim) if j != i]
                rest = [s for idx, s in enumerate(scores) if idx != k]
                for j, s in zip(others, rest):
                    vec[j] = s
            out.append(vec)
        return out


planted = [1, 2, 4, 1, 2, 1]
corpus = EvalCorpus([
    CodeCommentPair(id=f"p{i}", language="java", code=f"code {i}",
                    comment=f"query {i}")
    for i in range(len(planted))
], name="demo")

result = mrr(corpus, PlantedRankBackend(planted, len(planted)),
             batch_size=len(planted))
print("\nobserved ranks:", [(r["id"], r["rank"]) for r in result.ranks])
print(f"batch score = mean of reciprocal ranks = {result.batch_scores[0]:.4f}")
print(f"final score over {len(result.batch_scores)} batch(es): {result.mrr:.4f}")
