"""The double-rater protocol end to end, without the HTTP layer.

Sizes the sample with the finite-population correction, assigns blinded
tasks, plays a scripted rating stream with one forced conflict, and
aggregates the final per-system table.
"""

import random

from commenteval import build_assignments, sample_size
from commenteval.humaneval import Rating, RatingProtocol, humaneval_summary_table

population = 4985
needed = sample_size(population, z=1.96, e=0.05, p=0.5)
print(f"population of {population} -> minimum sample of {needed}")

snippets = [f"snippet-{i}" for i in range(4)]
systems = ["human-reference", "model-a", "model-b"]
raters = ["ana", "ben", "chloe", "dmitri"]

assignments = build_assignments(
    snippets, systems, raters, seed=2024,
    content=lambda s, sys_id: (f"code of {s}", f"candidate summary for {s}"),
)
print(f"\n{len(assignments.tasks)} tasks "
      f"({len(snippets)} snippets x {len(systems)} blinded slots x 2 raters)")

protocol = RatingProtocol(assignments)
rng = random.Random(7)
conflict_item = (snippets[0], 1)
conflict_scores = iter([2, 5])  # an enormous disagreement on naturalness

while True:
    pending = [protocol.next_task(r) for r in raters]
    pending = [t for t in pending if t is not None]
    if not pending:
        break
    for task in pending:
        if task.is_escalation:
            scores = (4, 4, 4)
            print(f"  third rating requested from {task.rater_id} "
                  f"for {task.snippet_id} slot {task.blind_slot}")
        elif (task.snippet_id, task.blind_slot) == conflict_item:
            scores = (next(conflict_scores), 3, 3)
        else:
            base = rng.randint(3, 4)
            scores = (base, base, min(5, base + 1))
        ack = protocol.submit_rating(Rating(task.task_id, task.rater_id, *scores))
        if ack.conflict_escalated:
            print(f"  conflict on {task.snippet_id} slot {task.blind_slot} "
                  f"-> escalated to {ack.escalation_task_id.rsplit('|', 1)[1]}")

print("\nprogress:", protocol.progress())
print("\nper-system aggregate (blind slots resolved back to systems):")
print(humaneval_summary_table(protocol.aggregate()))
