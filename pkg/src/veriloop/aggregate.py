"""Verdict aggregation: worker scoring, gold screening, panel fusion, reports.

Workers are scored against ground truth over their non-gold pairs only;
accuracy is kept as exact integer counts and derived on demand. Workers
who miss any gold question are excluded from every downstream statistic.
Per-pair panel decisions (majority vote) are reported separately and never
feed back into worker accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Sequence

from . import stats
from .assignment import AssignmentPolicy, Condition, TaskAssignment
from .corpus import GroundTruth, PairManifest, RaceLabel, Unmapped
from .errors import EngineError
from .stats import KWResult
from .triage import EmptyVerdictSet


class IncompleteSubmission(EngineError):
    def __init__(self, missing: Sequence[str]):
        preview = ", ".join(sorted(missing)[:5])
        super().__init__(f"submission missing {len(missing)} pair(s): {preview}")
        self.missing = tuple(sorted(missing))


class DuplicateWorker(EngineError):
    def __init__(self, worker_id: str):
        super().__init__(f"duplicate worker in panel: {worker_id!r}")
        self.worker_id = worker_id


class ZeroBaseline(EngineError):
    pass


class EmptyCell(EngineError):
    def __init__(self, condition: Condition, race: str):
        super().__init__(f"no passing workers in cell ({condition.value}, {race})")
        self.condition = condition
        self.race = race


class HumanVerdict(NamedTuple):
    worker_id: str
    pair_id: str
    decision: GroundTruth
    elapsed_ms: int
    submitted_at: float


@dataclass(frozen=True, slots=True)
class WorkerScore:
    worker_id: str
    race: RaceLabel
    condition: Condition
    n_correct: int
    n_total: int

    def __post_init__(self):
        if self.n_total < 1:
            raise EngineError("worker score needs at least one scored pair")
        if not 0 <= self.n_correct <= self.n_total:
            raise EngineError("n_correct out of range")

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_total


class PanelOutcome(Enum):
    MATCH = "match"
    NON_MATCH = "non_match"
    UNRESOLVED = "unresolved"


class PanelDecision(NamedTuple):
    pair_id: str
    decision: PanelOutcome
    votes_match: int
    votes_nonmatch: int


@dataclass(frozen=True, slots=True)
class GoldScreen:
    """Outcome of gold-question screening: passes iff no gold pair was missed."""

    failed: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.failed


def _verdicts_by_pair(verdicts: Iterable[HumanVerdict]) -> dict[str, HumanVerdict]:
    by_pair: dict[str, HumanVerdict] = {}
    for v in verdicts:
        if v.pair_id in by_pair:
            raise EngineError(f"two verdicts for pair {v.pair_id!r} in one submission")
        by_pair[v.pair_id] = v
    return by_pair


def score_worker(
    verdicts: Sequence[HumanVerdict],
    assignment: TaskAssignment,
    manifest: PairManifest,
) -> WorkerScore:
    """Count correct decisions over the assignment's non-gold pairs."""
    by_pair = _verdicts_by_pair(verdicts)
    scored = assignment.scored_pair_ids
    missing = [pid for pid in scored if pid not in by_pair]
    if missing:
        raise IncompleteSubmission(missing)
    pair_index = manifest.by_id
    n_correct = 0
    for pid in scored:
        pair = pair_index.get(pid)
        if pair is None:
            manifest.require(pid)  # raises UnknownPair
        if by_pair[pid].decision is pair.truth:
            n_correct += 1
    condition = (
        Condition.SAME_RACE
        if assignment.policy is AssignmentPolicy.SAME_RACE
        else Condition.CONTROL
    )
    return WorkerScore(
        worker_id=assignment.worker_id,
        race=assignment.worker_race,
        condition=condition,
        n_correct=n_correct,
        n_total=len(scored),
    )


def screen_gold(
    verdicts: Sequence[HumanVerdict],
    assignment: TaskAssignment,
    manifest: PairManifest,
) -> GoldScreen:
    """Pass iff every gold pair was answered correctly; vacuous pass for no gold."""
    by_pair = _verdicts_by_pair(verdicts)
    missing = [pid for pid in assignment.gold_pair_ids if pid not in by_pair]
    if missing:
        raise IncompleteSubmission(missing)
    failed = tuple(
        pid
        for pid in assignment.gold_pair_ids
        if by_pair[pid].decision is not manifest.require(pid).truth
    )
    return GoldScreen(failed)


def majority_vote(verdicts: Sequence[HumanVerdict]) -> PanelDecision:
    """Fuse one pair's verdicts from several workers; ties are unresolved."""
    if not verdicts:
        raise EmptyVerdictSet("cannot vote on an empty panel")
    pair_id = verdicts[0].pair_id
    workers: set[str] = set()
    votes_match = 0
    for v in verdicts:
        if v.worker_id in workers:
            raise DuplicateWorker(v.worker_id)
        workers.add(v.worker_id)
        if v.decision is GroundTruth.MATCH:
            votes_match += 1
    votes_nonmatch = len(verdicts) - votes_match
    if votes_match > votes_nonmatch:
        decision = PanelOutcome.MATCH
    elif votes_nonmatch > votes_match:
        decision = PanelOutcome.NON_MATCH
    else:
        decision = PanelOutcome.UNRESOLVED
    return PanelDecision(pair_id, decision, votes_match, votes_nonmatch)


def percentage_difference(control_median: float, same_race_median: float) -> float:
    """Relative gain of the same-race condition over control, in percent."""
    if control_median <= 0:
        raise ZeroBaseline(f"control median must be > 0, got {control_median}")
    return (same_race_median - control_median) / control_median * 100.0


@dataclass(frozen=True, slots=True)
class CellSummary:
    condition: Condition
    race: str
    accuracies: tuple[float, ...]
    median: float
    count: int


@dataclass(frozen=True, slots=True)
class RaceComparison:
    race: str
    control_median: float
    same_race_median: float
    percentage_difference: float
    kw: KWResult | None


@dataclass(frozen=True, slots=True)
class ExperimentReport:
    cells: tuple[CellSummary, ...]
    races: tuple[RaceComparison, ...]
    excluded_workers: tuple[tuple[str, str], ...]

    def cell(self, condition: Condition, race: str) -> CellSummary | None:
        for c in self.cells:
            if c.condition is condition and c.race == race:
                return c
        return None

    def race(self, race: str) -> RaceComparison | None:
        for r in self.races:
            if r.race == race:
                return r
        return None


def _race_key(race: RaceLabel) -> str:
    if isinstance(race, Unmapped):
        return f"unmapped({race.text})"
    return race


def build_report(
    scores: Sequence[WorkerScore],
    screenings: Mapping[str, GoldScreen],
    kw_results: Mapping[str, KWResult] | None = None,
) -> ExperimentReport:
    """Assemble per-cell accuracy distributions and per-race comparisons.

    Failed-gold workers are dropped from every cell and listed in
    excluded_workers. Cell accuracy lists are sorted ascending so the
    report is canonical regardless of score iteration order. Medians use
    the shared kernel. Kruskal-Wallis results are taken from kw_results
    when provided; otherwise they are computed per race over the
    post-exclusion control and same-race accuracy vectors, and omitted
    where the test is undefined (a cell missing, pooled sample too small,
    or all accuracies identical).
    """
    excluded: list[tuple[str, str]] = []
    excluded_ids: set[str] = set()
    for worker_id, screen in screenings.items():
        if not screen.passed:
            excluded.append((worker_id, "failed_gold:" + ",".join(screen.failed)))
            excluded_ids.add(worker_id)

    all_cells: dict[tuple[Condition, str], list[WorkerScore]] = {}
    passing_cells: dict[tuple[Condition, str], list[WorkerScore]] = {}
    for score in scores:
        key = (score.condition, _race_key(score.race))
        all_cells.setdefault(key, [])
        passing_cells.setdefault(key, [])
        all_cells[key].append(score)
        if score.worker_id not in excluded_ids:
            passing_cells[key].append(score)

    for (condition, race), members in passing_cells.items():
        if not members:
            raise EmptyCell(condition, race)

    cell_order = sorted(passing_cells, key=lambda k: (k[0].value, k[1]))
    cells = []
    for key in cell_order:
        condition, race = key
        accuracies = tuple(sorted(s.accuracy for s in passing_cells[key]))
        cells.append(
            CellSummary(
                condition=condition,
                race=race,
                accuracies=accuracies,
                median=stats.median(accuracies),
                count=len(accuracies),
            )
        )
    by_key = {(c.condition, c.race): c for c in cells}

    races = []
    race_names = sorted({race for _, race in by_key})
    for race in race_names:
        control = by_key.get((Condition.CONTROL, race))
        same_race = by_key.get((Condition.SAME_RACE, race))
        if control is None or same_race is None:
            continue
        kw: KWResult | None
        if kw_results is not None:
            kw = kw_results.get(race)
        else:
            try:
                kw = stats.kruskal_wallis([control.accuracies, same_race.accuracies])
            except stats.StatsError:
                kw = None
        races.append(
            RaceComparison(
                race=race,
                control_median=control.median,
                same_race_median=same_race.median,
                percentage_difference=percentage_difference(control.median, same_race.median),
                kw=kw,
            )
        )

    excluded.sort()
    return ExperimentReport(tuple(cells), tuple(races), tuple(excluded))


def render_report(report: ExperimentReport) -> str:
    """Fixed-format text rendering; bit-stable for identical reports."""
    lines = ["experiment report", "================="]
    lines.append("")
    lines.append(f"{'cell':<24}{'n':>4}  {'median%':>8}  accuracies%")
    for cell in report.cells:
        name = f"{cell.condition.value}/{cell.race}"
        accs = ", ".join(f"{a * 100:.2f}" for a in cell.accuracies)
        lines.append(f"{name:<24}{cell.count:>4}  {cell.median * 100:>8.2f}  {accs}")
    lines.append("")
    lines.append(
        f"{'race':<16}{'control%':>9}  {'same_race%':>10}  {'diff%':>8}  "
        f"{'KW H':>8}  {'df':>3}  {'p':>7}"
    )
    for rc in report.races:
        if rc.kw is None:
            kw_part = f"{'-':>8}  {'-':>3}  {'-':>7}"
        else:
            kw_part = f"{rc.kw.H:>8.4f}  {rc.kw.df:>3}  {rc.kw.p_value:>7.4f}"
        lines.append(
            f"{rc.race:<16}{rc.control_median * 100:>9.2f}  "
            f"{rc.same_race_median * 100:>10.2f}  {rc.percentage_difference:>+8.2f}  {kw_part}"
        )
    lines.append("")
    lines.append(f"excluded workers ({len(report.excluded_workers)})")
    for worker_id, reason in report.excluded_workers:
        lines.append(f"  {worker_id}  {reason}")
    lines.append("")
    return "\n".join(lines)


def report_to_dict(report: ExperimentReport) -> dict:
    return {
        "cells": [
            {
                "condition": c.condition.value,
                "race": c.race,
                "n": c.count,
                "median": c.median,
                "accuracies": list(c.accuracies),
            }
            for c in report.cells
        ],
        "races": [
            {
                "race": r.race,
                "control_median": r.control_median,
                "same_race_median": r.same_race_median,
                "percentage_difference": r.percentage_difference,
                "kw": None
                if r.kw is None
                else {"H": r.kw.H, "df": r.kw.df, "p_value": r.kw.p_value},
            }
            for r in report.races
        ],
        "excluded_workers": [
            {"worker_id": w, "reason": reason} for w, reason in report.excluded_workers
        ],
    }
