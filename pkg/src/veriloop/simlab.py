"""Synthetic-worker simulation lab.

Replaces live crowdworkers with Bernoulli correctness models: a synthetic
worker answers each pair correctly with a probability that depends only on
the worker's race and the pair's race. Seeded Monte Carlo replications run
the full two-condition experiment through the real assignment, screening,
and aggregation pipeline, so every run exercises the production code path
end to end.

Per-run random streams are derived from (master seed, run index) with a
fixed 64-bit mix, so results are identical whether runs execute serially
or in parallel.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping

from .aggregate import (
    ExperimentReport,
    GoldScreen,
    HumanVerdict,
    WorkerScore,
    build_report,
    score_worker,
    screen_gold,
)
from .assignment import (
    AssignmentPolicy,
    Condition,
    TaskAssignment,
    WorkerProfile,
    build_control_assignments,
    build_same_race_assignments,
    inject_gold,
)
from .corpus import PairManifest, stratum
from .errors import EngineError
from .jsonl import dumps_record
from .seeds import mix64


@dataclass(frozen=True, slots=True)
class WorkerModel:
    """P(correct) per face race for one synthetic worker."""

    race: str
    accuracy_matrix: Mapping[str, float]

    def __post_init__(self):
        for label, p in self.accuracy_matrix.items():
            if not 0.0 <= p <= 1.0:
                raise EngineError(f"accuracy for {label!r} must be in [0, 1], got {p}")


@dataclass(frozen=True, slots=True)
class SimConfig:
    workers_per_race: int = 20
    quota: int = 32
    gold_count: int = 2
    own_race_accuracy: float = 0.82
    cross_race_accuracy: float = 0.70
    policies: tuple[AssignmentPolicy, ...] = (
        AssignmentPolicy.BALANCED,
        AssignmentPolicy.SAME_RACE,
    )
    seed: int = 0
    n_runs: int = 1
    manifest: str | None = None

    def __post_init__(self):
        if self.workers_per_race < 1:
            raise EngineError("workers_per_race must be >= 1")
        if self.quota < 1:
            raise EngineError("quota must be >= 1")
        if self.gold_count < 0:
            raise EngineError("gold_count must be >= 0")
        if self.n_runs < 1:
            raise EngineError("n_runs must be >= 1")
        for name in ("own_race_accuracy", "cross_race_accuracy"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise EngineError(f"{name} must be in [0, 1], got {p}")
        if not self.policies:
            raise EngineError("at least one assignment policy is required")


_CONFIG_KEYS = {
    "workers_per_race": int,
    "quota": int,
    "gold_count": int,
    "own_race_accuracy": float,
    "cross_race_accuracy": float,
    "seed": int,
    "n_runs": int,
}


def load_config(path: str) -> SimConfig:
    """Parse a plain key=value configuration file ('#' starts a comment)."""
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise EngineError(f"{path}:{line_no}: expected key=value")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key in _CONFIG_KEYS:
                try:
                    values[key] = _CONFIG_KEYS[key](raw)
                except ValueError:
                    raise EngineError(f"{path}:{line_no}: bad value for {key}: {raw!r}")
            elif key == "policies":
                values["policies"] = tuple(
                    AssignmentPolicy.parse(p.strip()) for p in raw.split(",") if p.strip()
                )
            elif key == "manifest":
                values["manifest"] = raw
            else:
                raise EngineError(f"{path}:{line_no}: unknown key {key!r}")
    return SimConfig(**values)


def run_seed(master_seed: int, run_index: int) -> int:
    """Deterministic 64-bit mix of the master seed and run index."""
    return mix64(master_seed, run_index)


def simulate_worker(
    model: WorkerModel,
    assignment: TaskAssignment,
    manifest: PairManifest,
    rng: random.Random,
) -> list[HumanVerdict]:
    """One verdict per assigned pair, correct with the matrix probability.

    Timestamps and elapsed times are fixed at zero: simulated submissions
    must be fully determined by the stream state.
    """
    matrix = model.accuracy_matrix
    by_id = manifest.by_id
    draw = rng.random
    verdicts = []
    worker_id = assignment.worker_id
    for pid in assignment.pair_ids:
        pair = by_id.get(pid)
        if pair is None:
            manifest.require(pid)  # raises UnknownPair
        try:
            p_correct = matrix[pair.race]
        except KeyError:
            raise EngineError(f"accuracy matrix missing label {pair.race!r}")
        truth = pair.truth
        decision = truth if draw() < p_correct else truth.flipped()
        verdicts.append(HumanVerdict(worker_id, pid, decision, 0, 0.0))
    return verdicts


def _uniform_matrix(labels, own_race: str, own: float, cross: float) -> dict[str, float]:
    return {label: (own if label == own_race else cross) for label in labels}


def run_experiment(config: SimConfig, manifest: PairManifest, run_index: int) -> ExperimentReport:
    """One full control-vs-same-race replication.

    Builds worker registries (workers_per_race per race per condition),
    reserves a per-race gold pool, assigns tasks under each configured
    policy, simulates verdicts, screens gold, scores workers, and
    assembles the standard report.
    """
    rng = random.Random(run_seed(config.seed, run_index))
    labels = manifest.label_set

    gold_pool = {
        label: rng.sample(stratum(manifest, label), config.gold_count) if config.gold_count else []
        for label in labels
    }
    gold_ids = {p.pair_id for pool in gold_pool.values() for p in pool}
    assignable = manifest.without(gold_ids) if gold_ids else manifest

    cohorts: dict[AssignmentPolicy, list[WorkerProfile]] = {}
    for policy in config.policies:
        condition = (
            Condition.SAME_RACE if policy is AssignmentPolicy.SAME_RACE else Condition.CONTROL
        )
        cohorts[policy] = [
            WorkerProfile(
                worker_id=f"run{run_index}-{policy.value}-{label}-{i}",
                self_identified_race=label,
                coded_race=label,
                condition=condition,
            )
            for label in labels
            for i in range(config.workers_per_race)
        ]

    assignments: list[TaskAssignment] = []
    for policy, cohort in cohorts.items():
        if policy is AssignmentPolicy.SAME_RACE:
            built = build_same_race_assignments(
                cohort, assignable, config.quota, seed=rng.getrandbits(63)
            )
        else:
            built = build_control_assignments(
                cohort, assignable, config.quota, seed=rng.getrandbits(63)
            )
        assignments.extend(built)

    profile_by_id = {w.worker_id: w for cohort in cohorts.values() for w in cohort}
    scores: list[WorkerScore] = []
    screenings: dict[str, GoldScreen] = {}
    for a in assignments:
        worker = profile_by_id[a.worker_id]
        if config.gold_count:
            a = inject_gold(a, gold_pool[worker.coded_race], config.gold_count, rng.getrandbits(63))
        model = WorkerModel(
            race=worker.coded_race,
            accuracy_matrix=_uniform_matrix(
                labels, worker.coded_race, config.own_race_accuracy, config.cross_race_accuracy
            ),
        )
        verdicts = simulate_worker(model, a, manifest, rng)
        screenings[a.worker_id] = screen_gold(verdicts, a, manifest)
        scores.append(score_worker(verdicts, a, manifest))

    return build_report(scores, screenings)


@dataclass(frozen=True, slots=True)
class RaceOutcome:
    race: str
    same_race_wins_fraction: float
    pct_diff_mean: float
    pct_diff_sd: float


@dataclass(frozen=True, slots=True)
class SimSummary:
    n_runs: int
    races: tuple[RaceOutcome, ...]
    reports: tuple[ExperimentReport, ...] = field(repr=False)

    def race(self, race: str) -> RaceOutcome | None:
        for r in self.races:
            if r.race == race:
                return r
        return None


def monte_carlo(config: SimConfig, manifest: PairManifest) -> SimSummary:
    """n_runs independent replications folded into per-race summaries."""
    reports = tuple(run_experiment(config, manifest, i) for i in range(config.n_runs))
    race_names = sorted({rc.race for report in reports for rc in report.races})
    outcomes = []
    for race in race_names:
        diffs: list[float] = []
        wins = 0
        present = 0
        for report in reports:
            rc = report.race(race)
            if rc is None:
                continue
            present += 1
            diffs.append(rc.percentage_difference)
            if rc.same_race_median > rc.control_median:
                wins += 1
        mean = sum(diffs) / len(diffs)
        variance = sum((d - mean) ** 2 for d in diffs) / len(diffs)
        outcomes.append(
            RaceOutcome(
                race=race,
                same_race_wins_fraction=wins / present,
                pct_diff_mean=mean,
                pct_diff_sd=variance**0.5,
            )
        )
    return SimSummary(n_runs=config.n_runs, races=tuple(outcomes), reports=reports)


def write_run_log(summary: SimSummary, path: str) -> None:
    """Machine-readable record-per-line log: one record per (run, race)."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, report in enumerate(summary.reports):
            for rc in report.races:
                fh.write(
                    dumps_record(
                        {
                            "run": i,
                            "race": rc.race,
                            "control_median": rc.control_median,
                            "same_race_median": rc.same_race_median,
                            "percentage_difference": rc.percentage_difference,
                            "excluded": len(report.excluded_workers),
                        }
                    )
                )
                fh.write("\n")


def render_summary(summary: SimSummary) -> str:
    lines = ["simulation summary", "=================="]
    lines.append(f"runs: {summary.n_runs}")
    lines.append("")
    lines.append(
        f"{'race':<16}{'same_race wins':>15}  {'mean diff%':>10}  {'sd diff%':>9}"
    )
    for r in summary.races:
        lines.append(
            f"{r.race:<16}{r.same_race_wins_fraction:>15.3f}  "
            f"{r.pct_diff_mean:>+10.2f}  {r.pct_diff_sd:>9.2f}"
        )
    lines.append("")
    return "\n".join(lines)
