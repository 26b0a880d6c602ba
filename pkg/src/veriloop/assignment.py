"""Worker registry, race coding, and task assignment building.

Workers self-identify their race as free text; a coding table maps that
text to the canonical label set. Assignments bind an ordered batch of pair
ids to one worker under one policy: same-race (every pair matches the
worker's coded race) or balanced (equal pair counts from every race).
Hidden gold pairs with known answers are injected for attention screening.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .corpus import (
    DuplicatePairId,
    ImagePair,
    LabelSet,
    PairManifest,
    RaceLabel,
    Unmapped,
)
from .errors import EngineError
from .jsonl import dumps_record, read_records, require_fields

ASSIGNMENT_FIELDS = ("assignment_id", "worker_id", "policy", "pair_ids", "gold_pair_ids")


class InsufficientPairs(EngineError):
    def __init__(self, race: str, have: int, need: int):
        super().__init__(f"stratum {race!r} has {have} pairs, need {need}")
        self.race = race
        self.have = have
        self.need = need


class UnmappedWorker(EngineError):
    def __init__(self, worker_id: str):
        super().__init__(f"worker {worker_id!r} has no canonical coded race")
        self.worker_id = worker_id


class QuotaNotDivisible(EngineError):
    def __init__(self, quota: int, label_count: int):
        super().__init__(f"quota {quota} is not divisible by {label_count} labels")
        self.quota = quota
        self.label_count = label_count


class GoldRaceMismatch(EngineError):
    def __init__(self, expected: str, got: str):
        super().__init__(f"gold pair race {got!r} does not match assignment race {expected!r}")
        self.expected = expected
        self.got = got


class NotEnoughGold(EngineError):
    def __init__(self, have: int, need: int):
        super().__init__(f"gold pool has {have} pairs, need {need}")
        self.have = have
        self.need = need


class Condition(Enum):
    CONTROL = "control"
    SAME_RACE = "same_race"
    UNASSIGNED = "unassigned"


class AssignmentPolicy(Enum):
    SAME_RACE = "same_race"
    BALANCED = "balanced"

    @classmethod
    def parse(cls, text: str) -> "AssignmentPolicy":
        try:
            return cls(text)
        except ValueError:
            valid = ", ".join(p.value for p in cls)
            raise EngineError(f"unknown assignment policy {text!r} (expected one of: {valid})")


@dataclass(frozen=True, slots=True)
class WorkerProfile:
    worker_id: str
    self_identified_race: str
    coded_race: RaceLabel
    prior_experience: bool = False
    condition: Condition = Condition.UNASSIGNED

    def __post_init__(self):
        if not self.worker_id:
            raise EngineError("worker id must be non-empty")
        if self.condition is Condition.SAME_RACE and isinstance(self.coded_race, Unmapped):
            raise UnmappedWorker(self.worker_id)


_WS = re.compile(r"\s+")


def normalize_race_text(text: str) -> str:
    return _WS.sub(" ", text.strip()).lower()


class RaceCodingTable:
    """Ordered (pattern -> canonical label) mapping for self-identified race.

    Patterns are compared after normalization: lowercased, trimmed, inner
    whitespace collapsed. The first matching entry wins; order is the
    operator's to control.
    """

    __slots__ = ("entries", "_lookup")

    def __init__(self, entries: Iterable[tuple[str, str]]):
        normalized: list[tuple[str, str]] = []
        lookup: dict[str, str] = {}
        for pattern, label in entries:
            key = normalize_race_text(pattern)
            if key in lookup:
                raise EngineError(f"duplicate coding pattern after normalization: {key!r}")
            lookup[key] = label
            normalized.append((key, label))
        self.entries = tuple(normalized)
        self._lookup = lookup

    def match(self, self_id: str) -> str | None:
        return self._lookup.get(normalize_race_text(self_id))

    @classmethod
    def default(cls, label_set: LabelSet | None = None) -> "RaceCodingTable":
        labels = LabelSet() if label_set is None else label_set
        entries = [(label, label) for label in labels]
        synonyms = {
            "African": ["Black or African American", "African American", "African-American", "Black"],
            "Asian": ["East Asian"],
            "Caucasian": ["White", "White or Caucasian"],
            "Indian": ["South Asian", "Indian or South Asian"],
        }
        for label, alts in synonyms.items():
            if label in labels:
                entries.extend((alt, label) for alt in alts)
        return cls(entries)

    @classmethod
    def load(cls, path: str, label_set: LabelSet | None = None) -> "RaceCodingTable":
        """Read "pattern = label" entries, one per line, order significant."""
        labels = LabelSet() if label_set is None else label_set
        entries: list[tuple[str, str]] = []
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                if "=" not in stripped:
                    raise EngineError(f"{path}:{line_no}: expected 'pattern = label'")
                pattern, _, label = stripped.partition("=")
                label = labels.require(label.strip())
                entries.append((pattern.strip(), label))
        return cls(entries)


def code_race(self_id: str, table: RaceCodingTable) -> RaceLabel:
    """Map self-identified race text to a canonical label, or Unmapped."""
    label = table.match(self_id)
    if label is None:
        return Unmapped(self_id)
    return label


@dataclass(frozen=True, slots=True)
class TaskAssignment:
    assignment_id: str
    worker_id: str
    policy: AssignmentPolicy
    pair_ids: tuple[str, ...]
    gold_pair_ids: tuple[str, ...] = ()
    worker_race: RaceLabel = Unmapped("")
    created_at: float = 0.0

    def __post_init__(self):
        if len(set(self.pair_ids)) != len(self.pair_ids):
            dupes = [p for p in self.pair_ids if self.pair_ids.count(p) > 1]
            raise DuplicatePairId(dupes[0])
        if not set(self.gold_pair_ids) <= set(self.pair_ids):
            stray = sorted(set(self.gold_pair_ids) - set(self.pair_ids))
            raise EngineError(f"gold ids not in assignment: {stray}")

    @property
    def scored_pair_ids(self) -> tuple[str, ...]:
        gold = set(self.gold_pair_ids)
        return tuple(p for p in self.pair_ids if p not in gold)


def build_same_race_assignments(
    workers: Sequence[WorkerProfile],
    routed: PairManifest,
    quota: int,
    seed: int,
    created_at: float = 0.0,
) -> list[TaskAssignment]:
    """One assignment per worker; every pair drawn from the worker's race.

    Each worker's pairs are an independent uniform sample without
    replacement from their race stratum. Identical inputs and seed yield
    identical output.
    """
    if quota < 1:
        raise EngineError(f"quota must be positive, got {quota}")
    rng = random.Random(seed)
    strata = {label: routed.by_race[label] for label in routed.label_set}
    assignments: list[TaskAssignment] = []
    for worker in workers:
        if isinstance(worker.coded_race, Unmapped):
            raise UnmappedWorker(worker.worker_id)
        pool = strata.get(worker.coded_race)
        if pool is None:
            raise UnmappedWorker(worker.worker_id)
        if len(pool) < quota:
            raise InsufficientPairs(worker.coded_race, len(pool), quota)
        picks = rng.sample(pool, quota)
        assignments.append(
            TaskAssignment(
                assignment_id=f"sr-{worker.worker_id}",
                worker_id=worker.worker_id,
                policy=AssignmentPolicy.SAME_RACE,
                pair_ids=tuple(p.pair_id for p in picks),
                worker_race=worker.coded_race,
                created_at=created_at,
            )
        )
    return assignments


def build_control_assignments(
    workers: Sequence[WorkerProfile],
    routed: PairManifest,
    quota: int,
    seed: int,
    created_at: float = 0.0,
) -> list[TaskAssignment]:
    """One race-balanced assignment per worker: quota/|labels| pairs per race."""
    if quota < 1:
        raise EngineError(f"quota must be positive, got {quota}")
    labels = routed.label_set
    if quota % len(labels) != 0:
        raise QuotaNotDivisible(quota, len(labels))
    per_race = quota // len(labels)
    strata = {label: routed.by_race[label] for label in labels}
    for label in labels:
        if len(strata[label]) < per_race:
            raise InsufficientPairs(label, len(strata[label]), per_race)
    rng = random.Random(seed)
    assignments: list[TaskAssignment] = []
    for worker in workers:
        picks: list[ImagePair] = []
        for label in labels:
            picks.extend(rng.sample(strata[label], per_race))
        rng.shuffle(picks)  # do not present race-blocked runs
        assignments.append(
            TaskAssignment(
                assignment_id=f"ctl-{worker.worker_id}",
                worker_id=worker.worker_id,
                policy=AssignmentPolicy.BALANCED,
                pair_ids=tuple(p.pair_id for p in picks),
                worker_race=worker.coded_race,
                created_at=created_at,
            )
        )
    return assignments


def inject_gold(
    assignment: TaskAssignment,
    gold: Sequence[ImagePair],
    count: int,
    seed: int,
) -> TaskAssignment:
    """Insert `count` gold pairs at seeded random positions.

    The relative order of pre-existing pairs is preserved. Same-race
    assignments only accept gold of the assignment's race.
    """
    if count < 0:
        raise EngineError(f"gold count must be >= 0, got {count}")
    if count == 0:
        return assignment
    if count > len(gold):
        raise NotEnoughGold(len(gold), count)
    existing = set(assignment.pair_ids)
    for g in gold:
        if g.pair_id in existing:
            raise DuplicatePairId(g.pair_id)
        if assignment.policy is AssignmentPolicy.SAME_RACE and g.race != assignment.worker_race:
            raise GoldRaceMismatch(str(assignment.worker_race), g.race)
    rng = random.Random(seed)
    chosen = rng.sample(list(gold), count)
    pair_ids = list(assignment.pair_ids)
    for g in chosen:
        pair_ids.insert(rng.randrange(len(pair_ids) + 1), g.pair_id)
    return replace(
        assignment,
        pair_ids=tuple(pair_ids),
        gold_pair_ids=assignment.gold_pair_ids + tuple(g.pair_id for g in chosen),
    )


def save_assignments(assignments: Iterable[TaskAssignment], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in assignments:
            fh.write(dumps_record(assignment_record(a)))
            fh.write("\n")


def assignment_record(a: TaskAssignment) -> dict:
    record = {
        "assignment_id": a.assignment_id,
        "worker_id": a.worker_id,
        "policy": a.policy.value,
        "pair_ids": list(a.pair_ids),
        "gold_pair_ids": list(a.gold_pair_ids),
        "created_at": a.created_at,
    }
    if isinstance(a.worker_race, Unmapped):
        record["worker_race"] = {"unmapped": a.worker_race.text}
    else:
        record["worker_race"] = a.worker_race
    return record


def assignment_from_record(record: Mapping) -> TaskAssignment:
    race = record.get("worker_race", {"unmapped": ""})
    if isinstance(race, dict):
        race = Unmapped(str(race.get("unmapped", "")))
    return TaskAssignment(
        assignment_id=str(record["assignment_id"]),
        worker_id=str(record["worker_id"]),
        policy=AssignmentPolicy.parse(str(record["policy"])),
        pair_ids=tuple(str(p) for p in record["pair_ids"]),
        gold_pair_ids=tuple(str(p) for p in record["gold_pair_ids"]),
        worker_race=race,
        created_at=float(record.get("created_at", 0.0)),
    )


def load_assignments(path: str) -> list[TaskAssignment]:
    assignments = []
    for line_no, record in read_records(path):
        require_fields(line_no, record, ASSIGNMENT_FIELDS)
        assignments.append(assignment_from_record(record))
    return assignments
