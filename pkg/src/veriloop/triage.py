"""Ensemble confidence triage: fuse model verdicts, route uncertain pairs.

Each automated model contributes a (decision, confidence) verdict per pair.
The ensemble confidence is the median of the per-model confidences; the
ensemble decision is the strict majority of the per-model decisions, with
even splits marked as ties. A routing policy then partitions pairs into an
auto-finalized set and a set sent on to human verification. Ties are
always routed, under every policy.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

from . import stats
from .corpus import DuplicatePairId, GroundTruth, PairManifest
from .errors import EngineError
from .jsonl import ParseError, dumps_record, read_records, require_fields

VERDICT_LOG_FIELDS = ("model_id", "pair_id", "decision", "confidence")


class EmptyVerdictSet(EngineError):
    pass


class MixedPairIds(EngineError):
    pass


class DuplicateModel(EngineError):
    def __init__(self, model_id: str):
        super().__init__(f"duplicate model in verdict set: {model_id!r}")
        self.model_id = model_id


class ConfidenceOutOfRange(EngineError):
    def __init__(self, model_id: str, pair_id: str, confidence: float):
        super().__init__(
            f"confidence {confidence!r} outside [0, 1] for model {model_id!r}, pair {pair_id!r}"
        )
        self.model_id = model_id
        self.pair_id = pair_id
        self.confidence = confidence


class ModelVerdict(NamedTuple):
    model_id: str
    pair_id: str
    decision: GroundTruth
    confidence: float


class TriageDecision(Enum):
    MATCH = "match"
    NON_MATCH = "non_match"
    TIE = "tie"


class EnsembleScore(NamedTuple):
    pair_id: str
    median_confidence: float
    ensemble_decision: TriageDecision
    model_count: int


class PolicyKind(Enum):
    UNCERTAIN_ALL = "uncertain_all"
    UNCERTAIN_NEGATIVES = "uncertain_negatives"
    UNCERTAIN_POSITIVES = "uncertain_positives"
    ALL_NEGATIVES = "all_negatives"
    ALL_POSITIVES = "all_positives"


_THRESHOLDED = frozenset(
    {PolicyKind.UNCERTAIN_ALL, PolicyKind.UNCERTAIN_NEGATIVES, PolicyKind.UNCERTAIN_POSITIVES}
)

DEFAULT_TAU = 0.5


@dataclass(frozen=True, slots=True)
class RoutingPolicy:
    """Which triaged pairs go to humans; tau is the uncertainty threshold.

    tau is required for the uncertain-* variants and forbidden otherwise.
    Confidence strictly below tau counts as uncertain; a pair sitting
    exactly at tau is treated as confident.
    """

    kind: PolicyKind
    tau: float | None = None

    def __post_init__(self):
        if self.kind in _THRESHOLDED:
            if self.tau is None:
                raise EngineError(f"policy {self.kind.value} requires a tau threshold")
            if not 0.0 <= self.tau <= 1.0:
                raise EngineError(f"tau must be in [0, 1], got {self.tau}")
        elif self.tau is not None:
            raise EngineError(f"policy {self.kind.value} does not take a tau threshold")

    @classmethod
    def from_flags(cls, name: str, tau: float | None = None) -> "RoutingPolicy":
        try:
            kind = PolicyKind(name)
        except ValueError:
            valid = ", ".join(k.value for k in PolicyKind)
            raise EngineError(f"unknown routing policy {name!r} (expected one of: {valid})")
        if kind in _THRESHOLDED and tau is None:
            tau = DEFAULT_TAU
        return cls(kind, tau if kind in _THRESHOLDED else None)


class TriageOutcome(NamedTuple):
    auto_finalized: tuple[tuple[str, TriageDecision], ...]
    routed: tuple[str, ...]


def ensemble_score(verdicts: Sequence[ModelVerdict]) -> EnsembleScore:
    """Fuse one pair's model verdicts into a single ensemble score."""
    if not verdicts:
        raise EmptyVerdictSet("cannot score an empty verdict set")
    pair_id = verdicts[0].pair_id
    models: set[str] = set()
    matches = 0
    for v in verdicts:
        if v.pair_id != pair_id:
            raise MixedPairIds(f"verdict set mixes pairs {pair_id!r} and {v.pair_id!r}")
        if v.model_id in models:
            raise DuplicateModel(v.model_id)
        models.add(v.model_id)
        if v.decision is GroundTruth.MATCH:
            matches += 1
    confidence = stats.median([v.confidence for v in verdicts])
    non_matches = len(verdicts) - matches
    if matches > non_matches:
        decision = TriageDecision.MATCH
    elif non_matches > matches:
        decision = TriageDecision.NON_MATCH
    else:
        decision = TriageDecision.TIE
    return EnsembleScore(pair_id, confidence, decision, len(verdicts))


def route(scores: Sequence[EnsembleScore], policy: RoutingPolicy) -> TriageOutcome:
    """Partition scored pairs into auto-finalized and human-routed sets."""
    seen: set[str] = set()
    finalized: list[tuple[str, TriageDecision]] = []
    routed: list[str] = []
    for score in scores:
        if score.pair_id in seen:
            raise DuplicatePairId(score.pair_id)
        seen.add(score.pair_id)
        if _routes(score, policy):
            routed.append(score.pair_id)
        else:
            finalized.append((score.pair_id, score.ensemble_decision))
    return TriageOutcome(tuple(finalized), tuple(routed))


def _routes(score: EnsembleScore, policy: RoutingPolicy) -> bool:
    decision = score.ensemble_decision
    if decision is TriageDecision.TIE:
        return True
    kind = policy.kind
    if kind is PolicyKind.UNCERTAIN_ALL:
        return score.median_confidence < policy.tau
    if kind is PolicyKind.UNCERTAIN_NEGATIVES:
        return decision is TriageDecision.NON_MATCH and score.median_confidence < policy.tau
    if kind is PolicyKind.UNCERTAIN_POSITIVES:
        return decision is TriageDecision.MATCH and score.median_confidence < policy.tau
    if kind is PolicyKind.ALL_NEGATIVES:
        return decision is TriageDecision.NON_MATCH
    return decision is TriageDecision.MATCH  # ALL_POSITIVES


def load_verdict_log(path: str) -> list[ModelVerdict]:
    """Load a model verdict log (one JSON record per line)."""
    verdicts: list[ModelVerdict] = []
    seen: set[tuple[str, str]] = set()
    for line_no, record in read_records(path):
        require_fields(line_no, record, VERDICT_LOG_FIELDS)
        model_id = str(record["model_id"])
        pair_id = str(record["pair_id"])
        try:
            decision = GroundTruth.parse(str(record["decision"]))
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from exc
        try:
            confidence = float(record["confidence"])
        except (TypeError, ValueError) as exc:
            raise ParseError(line_no, f"bad confidence: {record['confidence']!r}") from exc
        if not 0.0 <= confidence <= 1.0:
            raise ConfidenceOutOfRange(model_id, pair_id, confidence)
        if (model_id, pair_id) in seen:
            raise DuplicateModel(model_id)
        seen.add((model_id, pair_id))
        verdicts.append(ModelVerdict(model_id, pair_id, decision, confidence))
    return verdicts


def save_verdict_log(verdicts: Iterable[ModelVerdict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in verdicts:
            fh.write(
                dumps_record(
                    {
                        "model_id": v.model_id,
                        "pair_id": v.pair_id,
                        "decision": v.decision.value,
                        "confidence": v.confidence,
                    }
                )
            )
            fh.write("\n")


def group_by_pair(verdicts: Iterable[ModelVerdict]) -> dict[str, list[ModelVerdict]]:
    grouped: dict[str, list[ModelVerdict]] = {}
    for v in verdicts:
        grouped.setdefault(v.pair_id, []).append(v)
    return grouped


def model_accuracy(
    verdicts: Sequence[ModelVerdict], manifest: PairManifest
) -> dict[tuple[str, str], float]:
    """Per-(model, race) accuracy against manifest ground truth."""
    correct: dict[tuple[str, str], int] = {}
    total: dict[tuple[str, str], int] = {}
    for v in verdicts:
        pair = manifest.require(v.pair_id)
        key = (v.model_id, pair.race)
        total[key] = total.get(key, 0) + 1
        if v.decision is pair.truth:
            correct[key] = correct.get(key, 0) + 1
    return {key: correct.get(key, 0) / count for key, count in total.items()}


def write_outcome(outcome: TriageOutcome, path: str) -> None:
    """Write a triage outcome file: one record per pair with its disposition."""
    with open(path, "w", encoding="utf-8") as fh:
        for pair_id, decision in outcome.auto_finalized:
            fh.write(
                dumps_record({"pair_id": pair_id, "route": "auto", "decision": decision.value})
            )
            fh.write("\n")
        for pair_id in outcome.routed:
            fh.write(dumps_record({"pair_id": pair_id, "route": "human"}))
            fh.write("\n")
