"""Task gateway: registration, claiming, verdict intake, report retrieval.

The service owns a directory of append-only record-per-line logs (worker
registrations, assignments, verdicts) plus a small experiment-state file.
Every mutation is appended and fsynced before it is acknowledged, so a
crashed process replays its logs into an identical state. All domain
computation is delegated to the pure modules; the service only sequences
and persists.

Writes go through a single lock per service instance (single-writer commit
path); reads work against immutable values and need no lock.
"""

from __future__ import annotations

import json
import os
import random
import threading
import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple

from .aggregate import (
    ExperimentReport,
    GoldScreen,
    HumanVerdict,
    build_report,
    score_worker,
    screen_gold,
)
from .assignment import (
    AssignmentPolicy,
    Condition,
    RaceCodingTable,
    TaskAssignment,
    UnmappedWorker,
    WorkerProfile,
    assignment_from_record,
    assignment_record,
    build_control_assignments,
    build_same_race_assignments,
    code_race,
    inject_gold,
)
from .corpus import GroundTruth, ImagePair, PairManifest, Unmapped, load_manifest, stratum
from .errors import EngineError
from .jsonl import dumps_record, read_records
from .seeds import derived_seed


class ExperimentClosed(EngineError):
    pass


class ExperimentStillOpen(EngineError):
    pass


class IneligibleWorker(EngineError):
    pass


class DuplicateVerdict(EngineError):
    def __init__(self, worker_id: str, pair_id: str):
        super().__init__(f"verdict already recorded for ({worker_id!r}, {pair_id!r})")
        self.worker_id = worker_id
        self.pair_id = pair_id


class PairNotAssigned(EngineError):
    def __init__(self, worker_id: str, pair_id: str):
        super().__init__(f"pair {pair_id!r} is not assigned to worker {worker_id!r}")
        self.worker_id = worker_id
        self.pair_id = pair_id


class UnknownWorker(EngineError):
    def __init__(self, worker_id: str):
        super().__init__(f"unknown worker: {worker_id!r}")
        self.worker_id = worker_id


class UnknownExperiment(EngineError):
    def __init__(self, experiment_id: str):
        super().__init__(f"unknown experiment: {experiment_id!r}")
        self.experiment_id = experiment_id


class ExperimentStatus(Enum):
    DRAFT = "draft"
    OPEN = "open"
    CLOSED = "closed"


@dataclass(frozen=True, slots=True)
class ExperimentState:
    experiment_id: str
    manifest_ref: str
    routing_policy: str
    assignment_policies: tuple[AssignmentPolicy, ...]
    status: ExperimentStatus
    created_at: float
    quota: int = 32
    gold_count: int = 2
    seed: int = 0
    replication_mode: bool = False

    def to_record(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "manifest_ref": self.manifest_ref,
            "routing_policy": self.routing_policy,
            "assignment_policies": [p.value for p in self.assignment_policies],
            "status": self.status.value,
            "created_at": self.created_at,
            "quota": self.quota,
            "gold_count": self.gold_count,
            "seed": self.seed,
            "replication_mode": self.replication_mode,
        }

    @classmethod
    def from_record(cls, record: dict) -> "ExperimentState":
        return cls(
            experiment_id=str(record["experiment_id"]),
            manifest_ref=str(record["manifest_ref"]),
            routing_policy=str(record.get("routing_policy", "")),
            assignment_policies=tuple(
                AssignmentPolicy.parse(p) for p in record["assignment_policies"]
            ),
            status=ExperimentStatus(record["status"]),
            created_at=float(record["created_at"]),
            quota=int(record.get("quota", 32)),
            gold_count=int(record.get("gold_count", 2)),
            seed=int(record.get("seed", 0)),
            replication_mode=bool(record.get("replication_mode", False)),
        )


class VerdictLogEntry(NamedTuple):
    sequence_number: int
    experiment_id: str
    worker_id: str
    pair_id: str
    decision: GroundTruth
    elapsed_ms: int
    submitted_at: float

    def to_record(self) -> dict:
        return {
            "sequence_number": self.sequence_number,
            "experiment_id": self.experiment_id,
            "worker_id": self.worker_id,
            "pair_id": self.pair_id,
            "decision": self.decision.value,
            "elapsed_ms": self.elapsed_ms,
            "submitted_at": self.submitted_at,
        }

    def verdict(self) -> HumanVerdict:
        return HumanVerdict(
            self.worker_id, self.pair_id, self.decision, self.elapsed_ms, self.submitted_at
        )


def _worker_record(profile: WorkerProfile) -> dict:
    coded = profile.coded_race
    return {
        "worker_id": profile.worker_id,
        "self_identified_race": profile.self_identified_race,
        "coded_race": {"unmapped": coded.text} if isinstance(coded, Unmapped) else coded,
        "prior_experience": profile.prior_experience,
        "condition": profile.condition.value,
    }


def _worker_from_record(record: dict) -> WorkerProfile:
    coded = record["coded_race"]
    if isinstance(coded, dict):
        coded = Unmapped(str(coded.get("unmapped", "")))
    return WorkerProfile(
        worker_id=str(record["worker_id"]),
        self_identified_race=str(record["self_identified_race"]),
        coded_race=coded,
        prior_experience=bool(record["prior_experience"]),
        condition=Condition(record["condition"]),
    )


class _AppendLog:
    """Append-only JSONL file; every append is flushed and fsynced."""

    def __init__(self, path: str, durable: bool = True):
        self.path = path
        self.durable = durable
        self._fh = open(path, "a", encoding="utf-8")

    def append(self, record: dict) -> None:
        self._fh.write(dumps_record(record))
        self._fh.write("\n")
        self._fh.flush()
        if self.durable:
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        self._fh.close()


class GatewayService:
    """One experiment's worker-facing service over a durable store.

    Opening a service on a directory that already holds an experiment
    replays its logs; otherwise a fresh experiment is created from the
    given state. The caller owns closing the service.
    """

    def __init__(
        self,
        data_dir: str,
        state: ExperimentState | None = None,
        coding_table: RaceCodingTable | None = None,
        manifest: PairManifest | None = None,
        durable: bool = True,
    ):
        self.data_dir = data_dir
        os.makedirs(data_dir, exist_ok=True)
        self._state_path = os.path.join(data_dir, "experiment.json")
        self._lock = threading.Lock()

        if os.path.exists(self._state_path):
            with open(self._state_path, encoding="utf-8") as fh:
                self.state = ExperimentState.from_record(json.load(fh))
        elif state is not None:
            self.state = state
            self._write_state()
        else:
            raise EngineError(f"no experiment at {data_dir} and no state given")

        self.manifest = manifest if manifest is not None else load_manifest(self.state.manifest_ref)
        self.coding_table = coding_table or RaceCodingTable.default(self.manifest.label_set)

        # Gold pools are re-derived from the experiment seed, not persisted:
        # the derivation is deterministic, so replay reconstructs them.
        self._gold_pool: dict[str, list[ImagePair]] = {}
        if self.state.gold_count > 0:
            for label in self.manifest.label_set:
                rng_seed = derived_seed(self.state.seed, "gold", label)
                pool = stratum(self.manifest, label)
                self._gold_pool[label] = random.Random(rng_seed).sample(
                    pool, min(self.state.gold_count, len(pool))
                )
        gold_ids = {p.pair_id for pool in self._gold_pool.values() for p in pool}
        self._assignable = self.manifest.without(gold_ids) if gold_ids else self.manifest

        self.workers: dict[str, WorkerProfile] = {}
        self.assignments: dict[str, TaskAssignment] = {}
        self.verdicts: dict[tuple[str, str], VerdictLogEntry] = {}
        self._next_sequence = 1
        self._registration_count = 0
        self._replay()

        self._workers_log = _AppendLog(os.path.join(data_dir, "workers.jsonl"), durable)
        self._assignments_log = _AppendLog(os.path.join(data_dir, "assignments.jsonl"), durable)
        self._verdicts_log = _AppendLog(os.path.join(data_dir, "verdicts.jsonl"), durable)

    def close(self) -> None:
        self._workers_log.close()
        self._assignments_log.close()
        self._verdicts_log.close()

    def _write_state(self) -> None:
        tmp = self._state_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.state.to_record(), fh, sort_keys=True, indent=2)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self._state_path)

    def _replay(self) -> None:
        workers_path = os.path.join(self.data_dir, "workers.jsonl")
        if os.path.exists(workers_path):
            for _, record in read_records(workers_path):
                profile = _worker_from_record(record)
                self.workers[profile.worker_id] = profile
                self._registration_count += 1
        assignments_path = os.path.join(self.data_dir, "assignments.jsonl")
        if os.path.exists(assignments_path):
            for _, record in read_records(assignments_path):
                a = assignment_from_record(record)
                self.assignments[a.worker_id] = a
        verdicts_path = os.path.join(self.data_dir, "verdicts.jsonl")
        if os.path.exists(verdicts_path):
            for _, record in read_records(verdicts_path):
                entry = VerdictLogEntry(
                    sequence_number=int(record["sequence_number"]),
                    experiment_id=str(record["experiment_id"]),
                    worker_id=str(record["worker_id"]),
                    pair_id=str(record["pair_id"]),
                    decision=GroundTruth.parse(str(record["decision"])),
                    elapsed_ms=int(record["elapsed_ms"]),
                    submitted_at=float(record["submitted_at"]),
                )
                self.verdicts[(entry.worker_id, entry.pair_id)] = entry
                self._next_sequence = max(self._next_sequence, entry.sequence_number + 1)

    # -- operations ------------------------------------------------------

    def register_worker(self, self_identified_race: str, prior_experience: bool) -> WorkerProfile:
        with self._lock:
            if self.state.status is not ExperimentStatus.OPEN:
                raise ExperimentClosed(f"experiment is {self.state.status.value}")
            if prior_experience and self.state.replication_mode:
                raise IneligibleWorker("replication mode excludes experienced workers")
            coded = code_race(self_identified_race, self.coding_table)
            condition = self._pick_condition(coded)
            profile = WorkerProfile(
                worker_id=f"w{self._registration_count + 1:05d}",
                self_identified_race=self_identified_race,
                coded_race=coded,
                prior_experience=prior_experience,
                condition=condition,
            )
            self._workers_log.append(_worker_record(profile))
            self.workers[profile.worker_id] = profile
            self._registration_count += 1
            return profile

    def _pick_condition(self, coded) -> Condition:
        policies = self.state.assignment_policies
        if isinstance(coded, Unmapped):
            if AssignmentPolicy.BALANCED in policies:
                return Condition.CONTROL
            return Condition.UNASSIGNED
        policy = policies[self._registration_count % len(policies)]
        return Condition.SAME_RACE if policy is AssignmentPolicy.SAME_RACE else Condition.CONTROL

    def claim_assignment(self, worker_id: str, experiment_id: str) -> TaskAssignment:
        self._require_experiment(experiment_id)
        with self._lock:
            existing = self.assignments.get(worker_id)
            if existing is not None:
                return existing  # claiming is idempotent
            if self.state.status is not ExperimentStatus.OPEN:
                raise ExperimentClosed(f"experiment is {self.state.status.value}")
            worker = self.workers.get(worker_id)
            if worker is None:
                raise UnknownWorker(worker_id)
            assignment = self._build_assignment(worker)
            self._assignments_log.append(assignment_record(assignment))
            self.assignments[worker_id] = assignment
            return assignment

    def _build_assignment(self, worker: WorkerProfile) -> TaskAssignment:
        seed = derived_seed(self.state.seed, "assign", worker.worker_id)
        created_at = round(time.time(), 3)
        if worker.condition is Condition.SAME_RACE:
            built = build_same_race_assignments(
                [worker], self._assignable, self.state.quota, seed, created_at=created_at
            )[0]
            gold = self._gold_pool.get(worker.coded_race, [])
        elif worker.condition is Condition.CONTROL:
            built = build_control_assignments(
                [worker], self._assignable, self.state.quota, seed, created_at=created_at
            )[0]
            gold = self._gold_for_control(worker)
        else:
            raise UnmappedWorker(worker.worker_id)
        if self.state.gold_count > 0:
            built = inject_gold(
                built, gold, self.state.gold_count, derived_seed(seed, "gold", worker.worker_id)
            )
        return built

    def _gold_for_control(self, worker: WorkerProfile) -> list[ImagePair]:
        if not isinstance(worker.coded_race, Unmapped):
            return self._gold_pool.get(worker.coded_race, [])
        # unmapped control worker: pick a deterministic label for their gold
        labels = self.manifest.label_set.labels
        index = derived_seed(self.state.seed, "goldlabel", worker.worker_id) % len(labels)
        return self._gold_pool.get(labels[index], [])

    def submit_verdict(
        self, worker_id: str, pair_id: str, decision: GroundTruth, elapsed_ms: int
    ) -> int:
        """Record one verdict durably; returns the assigned sequence number."""
        with self._lock:
            if self.state.status is not ExperimentStatus.OPEN:
                raise ExperimentClosed(f"experiment is {self.state.status.value}")
            assignment = self.assignments.get(worker_id)
            if assignment is None or pair_id not in assignment.pair_ids:
                raise PairNotAssigned(worker_id, pair_id)
            if (worker_id, pair_id) in self.verdicts:
                raise DuplicateVerdict(worker_id, pair_id)
            entry = VerdictLogEntry(
                sequence_number=self._next_sequence,
                experiment_id=self.state.experiment_id,
                worker_id=worker_id,
                pair_id=pair_id,
                decision=decision,
                elapsed_ms=max(0, int(elapsed_ms)),
                submitted_at=round(time.time(), 3),
            )
            self._verdicts_log.append(entry.to_record())
            self.verdicts[(worker_id, pair_id)] = entry
            self._next_sequence += 1
            return entry.sequence_number

    def pair_view(self, pair_id: str) -> dict:
        """Worker-facing pair metadata: image references only.

        Never exposes ground truth, race labels, or gold status.
        """
        pair = self.manifest.require(pair_id)
        return {"pair_id": pair.pair_id, "image_a": pair.image_a, "image_b": pair.image_b}

    def all_assignments_complete(self) -> bool:
        if not self.assignments:
            return False
        for a in self.assignments.values():
            for pid in a.pair_ids:
                if (a.worker_id, pid) not in self.verdicts:
                    return False
        return True

    def fetch_report(self, experiment_id: str) -> ExperimentReport:
        """Recompute the experiment report from the verdict log.

        Available once the experiment is closed or every assignment is
        complete; a pure function of the log contents. Closing with
        abandoned assignments is allowed: their workers are listed as
        excluded with reason "incomplete_submission" and contribute to no
        statistic.
        """
        self._require_experiment(experiment_id)
        closed = self.state.status is ExperimentStatus.CLOSED
        if not closed and not self.all_assignments_complete():
            raise ExperimentStillOpen("assignments are still incomplete")
        scores = []
        screenings: dict[str, GoldScreen] = {}
        incomplete: list[tuple[str, str]] = []
        for worker_id, assignment in sorted(self.assignments.items()):
            verdicts = [
                self.verdicts[(worker_id, pid)].verdict()
                for pid in assignment.pair_ids
                if (worker_id, pid) in self.verdicts
            ]
            if len(verdicts) < len(assignment.pair_ids):
                incomplete.append((worker_id, "incomplete_submission"))
                continue
            screenings[worker_id] = screen_gold(verdicts, assignment, self.manifest)
            scores.append(score_worker(verdicts, assignment, self.manifest))
        report = build_report(scores, screenings)
        if incomplete:
            merged = tuple(sorted(report.excluded_workers + tuple(incomplete)))
            report = replace(report, excluded_workers=merged)
        return report

    def close_experiment(self) -> None:
        with self._lock:
            self.state = replace(self.state, status=ExperimentStatus.CLOSED)
            self._write_state()

    def open_experiment(self) -> None:
        with self._lock:
            self.state = replace(self.state, status=ExperimentStatus.OPEN)
            self._write_state()

    def _require_experiment(self, experiment_id: str) -> None:
        if experiment_id != self.state.experiment_id:
            raise UnknownExperiment(experiment_id)

    def snapshot(self) -> dict:
        """Canonical view of replayable state, for equality checks."""
        return {
            "state": self.state.to_record(),
            "workers": {wid: _worker_record(w) for wid, w in sorted(self.workers.items())},
            "assignments": {
                wid: assignment_record(a) for wid, a in sorted(self.assignments.items())
            },
            "verdicts": [
                entry.to_record()
                for _, entry in sorted(self.verdicts.items(), key=lambda kv: kv[1].sequence_number)
            ],
            "next_sequence": self._next_sequence,
        }
