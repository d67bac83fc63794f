"""Human-rating protocol: statistically sized sampling, double-rater
assignment with per-snippet blinding, conflict-triggered third ratings,
and aggregation.

Every step is deterministic given (seed, rating stream), so a replayed
rating log reconstructs identical state and exports byte-identical files.
"""

from __future__ import annotations

import json
import math
import random
import statistics
from dataclasses import dataclass, field, replace
from math import fsum

from .errors import CommentEvalError, UnresolvedTasksError

ASPECTS = ("naturalness", "consistency", "usefulness")

CONFLICT_GAP = 2  # score difference that triggers a third rating


class UnknownRaterError(CommentEvalError):
    pass


class UnknownTaskError(CommentEvalError):
    pass


class WrongRaterError(CommentEvalError):
    pass


class DuplicateRatingError(CommentEvalError):
    pass


class ScoreRangeError(CommentEvalError):
    pass


def sample_size(N: int, z: float = 1.96, e: float = 0.05, p: float = 0.5) -> int:
    """Minimum sample for a finite population:
    n0 = z^2 * p * (1-p) / e^2, then ceil(n0 / (1 + (n0-1)/N)), clamped to [1, N]."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 < e < 1:
        raise ValueError("e must be in (0, 1)")
    if not 0 < p < 1:
        raise ValueError("p must be in (0, 1)")
    if z <= 0:
        raise ValueError("z must be > 0")
    n0 = (z * z) * p * (1.0 - p) / (e * e)
    corrected = n0 / (1.0 + (n0 - 1.0) / N)
    return max(1, min(N, math.ceil(corrected)))


def draw_sample(corpus, size: int, seed: int) -> list[str]:
    """Uniform sample of snippet ids without replacement, returned sorted."""
    ids = [p.id for p in corpus.pairs] if hasattr(corpus, "pairs") else list(corpus)
    if size > len(ids):
        raise ValueError(f"sample size {size} exceeds population {len(ids)}")
    return sorted(random.Random(seed).sample(ids, size))


@dataclass
class AnnotationTask:
    task_id: str
    snippet_id: str
    code: str
    comment: str
    blind_slot: int  # anonymized position 1..slot_count
    slot_count: int
    rater_id: str
    status: str = "open"  # open | rated
    is_escalation: bool = False

    def to_view(self) -> dict:
        """What a rater may see; carries no system identity."""
        return {
            "task_id": self.task_id,
            "snippet_id": self.snippet_id,
            "code": self.code,
            "comment": self.comment,
            "blind_slot": self.blind_slot,
            "slot_count": self.slot_count,
            "status": self.status,
            "is_escalation": self.is_escalation,
        }


@dataclass(frozen=True)
class Rating:
    task_id: str
    rater_id: str
    naturalness: int
    consistency: int
    usefulness: int
    timestamp: float = 0.0

    def aspect(self, name: str) -> int:
        return getattr(self, name)


@dataclass(frozen=True)
class FinalScore:
    snippet_id: str
    system_id: str
    naturalness: float
    consistency: float
    usefulness: float
    overall: float
    resolution: str  # mean_of_two | median_of_three


class PendingThird:
    """Marker: a third rating is required before the item can resolve."""

    def __repr__(self):
        return "PendingThird"


PENDING_THIRD = PendingThird()


@dataclass(frozen=True)
class Resolution:
    resolution: str
    finals: dict  # aspect -> float


def resolve_scores(ratings):
    """Two ratings whose aspect gaps are all < 2 resolve to per-aspect
    means; any gap >= 2 needs a third rating, after which each aspect
    takes the median of the three."""
    rs = list(ratings)
    if len(rs) < 2:
        raise ValueError("need at least two ratings")
    first, second = rs[0], rs[1]
    conflict = any(
        abs(first.aspect(a) - second.aspect(a)) >= CONFLICT_GAP for a in ASPECTS
    )
    if not conflict:
        finals = {a: (first.aspect(a) + second.aspect(a)) / 2 for a in ASPECTS}
        return Resolution("mean_of_two", finals)
    if len(rs) >= 3:
        finals = {
            a: float(statistics.median([r.aspect(a) for r in rs[:3]]))
            for a in ASPECTS
        }
        return Resolution("median_of_three", finals)
    return PENDING_THIRD


@dataclass
class SystemAggregate:
    naturalness: float
    consistency: float
    usefulness: float
    average: float
    snippet_count: int


def aggregate_humaneval(final_scores) -> dict[str, SystemAggregate]:
    """Per-system aspect means over snippets; average = mean of the three."""
    by_system: dict[str, list[FinalScore]] = {}
    for fs in final_scores:
        by_system.setdefault(fs.system_id, []).append(fs)
    out = {}
    for system, finals in sorted(by_system.items()):
        n = len(finals)
        means = {a: fsum(getattr(f, a) for f in finals) / n for a in ASPECTS}
        out[system] = SystemAggregate(
            naturalness=means["naturalness"],
            consistency=means["consistency"],
            usefulness=means["usefulness"],
            average=fsum(means.values()) / 3,
            snippet_count=n,
        )
    return out


def humaneval_summary_table(aggregates: dict[str, SystemAggregate]) -> str:
    header = f"{'system':<24} {'natural.':>9} {'consist.':>9} {'useful.':>9} {'average':>9}"
    lines = [header, "-" * len(header)]
    for system, agg in aggregates.items():
        lines.append(
            f"{system:<24} {agg.naturalness:>9.2f} {agg.consistency:>9.2f} "
            f"{agg.usefulness:>9.2f} {agg.average:>9.2f}"
        )
    return "\n".join(lines)


def _task_id(snippet_id: str, slot: int, rater_id: str) -> str:
    return f"{snippet_id}|s{slot:02d}|{rater_id}"


@dataclass
class AssignmentSet:
    tasks: list[AnnotationTask]
    blind_map: dict  # (snippet_id, slot) -> system_id
    snippets: list[str]
    systems: list[str]
    raters: list[str]
    seed: int
    raters_per_item: int = 2

    @property
    def slot_count(self) -> int:
        return len(self.systems)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "raters_per_item": self.raters_per_item,
            "snippets": self.snippets,
            "systems": self.systems,
            "raters": self.raters,
            "blind_map": [
                [snippet, slot, system]
                for (snippet, slot), system in sorted(self.blind_map.items())
            ],
            "tasks": [t.to_view() | {"rater_id": t.rater_id} for t in self.tasks],
        }

    @classmethod
    def from_json(cls, data: dict) -> "AssignmentSet":
        tasks = [
            AnnotationTask(
                task_id=t["task_id"],
                snippet_id=t["snippet_id"],
                code=t["code"],
                comment=t["comment"],
                blind_slot=t["blind_slot"],
                slot_count=t["slot_count"],
                rater_id=t["rater_id"],
                status="open",
                is_escalation=t.get("is_escalation", False),
            )
            for t in data["tasks"]
        ]
        blind_map = {(s, slot): system for s, slot, system in data["blind_map"]}
        return cls(
            tasks=tasks,
            blind_map=blind_map,
            snippets=data["snippets"],
            systems=data["systems"],
            raters=data["raters"],
            seed=data["seed"],
            raters_per_item=data.get("raters_per_item", 2),
        )


def build_assignments(snippets, systems, raters, raters_per_item: int = 2,
                      seed: int = 0, content=None) -> AssignmentSet:
    """Assign every (snippet, blind slot) to raters_per_item distinct raters.

    Loads stay within one task of each other (cyclic dealing over a
    seed-shuffled rater order). Each snippet gets its own seeded
    permutation of systems; the permutation is shared by the snippet's
    raters and kept out of the tasks themselves. `content` maps
    (snippet_id, system_id) -> (code, comment) when real texts are at hand.
    """
    snippets = list(snippets)
    systems = list(systems)
    raters = list(raters)
    if not systems:
        raise CommentEvalError("systems must be non-empty")
    if raters_per_item < 1:
        raise CommentEvalError("raters_per_item must be >= 1")
    if len(raters) < raters_per_item + 1:
        raise CommentEvalError(
            f"need at least {raters_per_item + 1} raters "
            f"({raters_per_item} per item plus a conflict reserve)")
    if len(set(raters)) != len(raters):
        raise CommentEvalError("duplicate rater ids")

    rater_cycle = list(raters)
    random.Random(seed).shuffle(rater_cycle)

    tasks: list[AnnotationTask] = []
    blind_map: dict[tuple[str, int], str] = {}
    cursor = 0
    for snippet_id in snippets:
        perm = list(systems)
        random.Random(f"{seed}|{snippet_id}").shuffle(perm)
        for slot, system_id in enumerate(perm, 1):
            blind_map[(snippet_id, slot)] = system_id
            code, comment = content(snippet_id, system_id) if content else ("", "")
            for _ in range(raters_per_item):
                rater_id = rater_cycle[cursor % len(rater_cycle)]
                cursor += 1
                tasks.append(AnnotationTask(
                    task_id=_task_id(snippet_id, slot, rater_id),
                    snippet_id=snippet_id,
                    code=code,
                    comment=comment,
                    blind_slot=slot,
                    slot_count=len(systems),
                    rater_id=rater_id,
                ))

    return AssignmentSet(
        tasks=tasks,
        blind_map=blind_map,
        snippets=snippets,
        systems=systems,
        raters=raters,
        seed=seed,
        raters_per_item=raters_per_item,
    )


@dataclass(frozen=True)
class Ack:
    accepted: bool
    conflict_escalated: bool
    escalation_task_id: str | None = None


class RatingProtocol:
    """In-memory state machine over an assignment set.

    Ratings arrive one at a time; when an item's primary pair completes
    with any aspect gap >= 2 an escalation task is created for a
    deterministically chosen third rater. State is a pure function of the
    assignment set and the rating stream, so replaying a log reproduces it.
    """

    def __init__(self, assignments: AssignmentSet):
        self.assignments = assignments
        self.log: list[Rating] = []  # accepted ratings, arrival order
        self._tasks: dict[str, AnnotationTask] = {}
        self._queues: dict[str, list[str]] = {r: [] for r in assignments.raters}
        self._primary: dict[tuple[str, int], list[str]] = {}
        self._ratings: dict[tuple[str, int], dict[str, Rating]] = {}
        self._escalations: dict[tuple[str, int], str] = {}
        self._resolutions: dict[tuple[str, int], Resolution] = {}
        for task in assignments.tasks:
            fresh = replace(task, status="open")
            self._tasks[fresh.task_id] = fresh
            self._queues[fresh.rater_id].append(fresh.task_id)
            key = (fresh.snippet_id, fresh.blind_slot)
            self._primary.setdefault(key, []).append(fresh.rater_id)
            self._ratings.setdefault(key, {})

    def next_task(self, rater_id: str) -> AnnotationTask | None:
        if rater_id not in self._queues:
            raise UnknownRaterError(f"unknown rater: {rater_id!r}")
        for task_id in self._queues[rater_id]:
            task = self._tasks[task_id]
            if task.status == "open":
                return task
        return None

    def submit_rating(self, rating: Rating) -> Ack:
        task = self._tasks.get(rating.task_id)
        if task is None:
            raise UnknownTaskError(f"unknown task: {rating.task_id!r}")
        if task.rater_id != rating.rater_id:
            raise WrongRaterError(
                f"task {rating.task_id!r} is not assigned to {rating.rater_id!r}")
        if task.status != "open":
            raise DuplicateRatingError(f"task {rating.task_id!r} already rated")
        for aspect in ASPECTS:
            value = rating.aspect(aspect)
            if not isinstance(value, int) or not 1 <= value <= 5:
                raise ScoreRangeError(f"{aspect} must be an integer in 1..5")

        task.status = "rated"
        key = (task.snippet_id, task.blind_slot)
        self._ratings[key][rating.rater_id] = rating
        self.log.append(rating)

        escalated = False
        escalation_task_id = None
        outcome = self._try_resolve(key)
        if outcome is PENDING_THIRD and key not in self._escalations:
            escalation_task_id = self._create_escalation(key, task)
            escalated = True
        return Ack(True, escalated, escalation_task_id)

    def _ordered_ratings(self, key) -> list[Rating]:
        got = self._ratings[key]
        ordered = [got[r] for r in self._primary[key] if r in got]
        third = self._escalations.get(key)
        if third is not None:
            third_rater = self._tasks[third].rater_id
            if third_rater in got:
                ordered.append(got[third_rater])
        return ordered

    def _try_resolve(self, key):
        ordered = self._ordered_ratings(key)
        if len(ordered) < 2:
            return None
        outcome = resolve_scores(ordered)
        if isinstance(outcome, Resolution):
            self._resolutions[key] = outcome
        return outcome

    def _create_escalation(self, key, rated_task: AnnotationTask) -> str:
        snippet_id, slot = key
        eligible = sorted(set(self.assignments.raters) - set(self._primary[key]))
        if not eligible:
            raise CommentEvalError("no rater left to escalate to")
        rng = random.Random(f"{self.assignments.seed}|{snippet_id}|{slot}|escalation")
        third = eligible[rng.randrange(len(eligible))]
        task = AnnotationTask(
            task_id=_task_id(snippet_id, slot, third),
            snippet_id=snippet_id,
            code=rated_task.code,
            comment=rated_task.comment,
            blind_slot=slot,
            slot_count=rated_task.slot_count,
            rater_id=third,
            is_escalation=True,
        )
        self._tasks[task.task_id] = task
        self._queues[third].append(task.task_id)
        self._escalations[key] = task.task_id
        return task.task_id

    def progress(self) -> dict:
        open_count = sum(1 for t in self._tasks.values() if t.status == "open")
        rated = sum(1 for t in self._tasks.values() if t.status == "rated")
        return {
            "open": open_count,
            "rated": rated,
            "escalated": len(self._escalations),
            "resolved": len(self._resolutions),
        }

    def final_scores(self) -> tuple[list[FinalScore], list[str]]:
        finals: list[FinalScore] = []
        unresolved: list[str] = []
        for snippet_id in self.assignments.snippets:
            for slot in range(1, self.assignments.slot_count + 1):
                key = (snippet_id, slot)
                resolution = self._resolutions.get(key)
                if resolution is None:
                    unresolved.append(f"{snippet_id}|s{slot:02d}")
                    continue
                f = resolution.finals
                finals.append(FinalScore(
                    snippet_id=snippet_id,
                    system_id=self.assignments.blind_map[key],
                    naturalness=f["naturalness"],
                    consistency=f["consistency"],
                    usefulness=f["usefulness"],
                    overall=fsum(f[a] for a in ASPECTS) / 3,
                    resolution=resolution.resolution,
                ))
        return finals, unresolved

    def export_jsonl(self) -> str:
        """Deterministic line-delimited export: resolved FinalScore records
        plus anonymous markers for unresolved items."""
        lines = []
        for snippet_id in self.assignments.snippets:
            for slot in range(1, self.assignments.slot_count + 1):
                key = (snippet_id, slot)
                resolution = self._resolutions.get(key)
                if resolution is None:
                    lines.append(json.dumps({
                        "snippet_id": snippet_id,
                        "blind_slot": slot,
                        "status": "unresolved",
                    }))
                else:
                    f = resolution.finals
                    lines.append(json.dumps({
                        "snippet_id": snippet_id,
                        "system_id": self.assignments.blind_map[key],
                        "naturalness": f["naturalness"],
                        "consistency": f["consistency"],
                        "usefulness": f["usefulness"],
                        "overall": fsum(f[a] for a in ASPECTS) / 3,
                        "resolution": resolution.resolution,
                    }))
        return "\n".join(lines) + ("\n" if lines else "")

    def aggregate(self) -> dict[str, SystemAggregate]:
        finals, unresolved = self.final_scores()
        if unresolved:
            raise UnresolvedTasksError(unresolved)
        return aggregate_humaneval(finals)

    @classmethod
    def replay(cls, assignments: AssignmentSet, ratings) -> "RatingProtocol":
        protocol = cls(assignments)
        for rating in ratings:
            protocol.submit_rating(rating)
        return protocol
