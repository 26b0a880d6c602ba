"""Race-aware human-in-the-loop orchestration for facial verification review.

Routes verification pairs from an automated ensemble to demographically
matched human verifiers, aggregates verdicts, and reproduces the
statistical evaluation pipeline. A synthetic-worker simulation lab stands
in for live crowdworkers at desk scale.
"""

from .aggregate import (
    ExperimentReport,
    GoldScreen,
    HumanVerdict,
    PanelDecision,
    PanelOutcome,
    WorkerScore,
    build_report,
    majority_vote,
    percentage_difference,
    render_report,
    score_worker,
    screen_gold,
)
from .assignment import (
    AssignmentPolicy,
    Condition,
    RaceCodingTable,
    TaskAssignment,
    WorkerProfile,
    build_control_assignments,
    build_same_race_assignments,
    code_race,
    inject_gold,
)
from .corpus import (
    DEFAULT_LABELS,
    GroundTruth,
    ImagePair,
    LabelSet,
    PairManifest,
    Unmapped,
    balance_strata,
    load_manifest,
    save_manifest,
    stratum,
)
from .errors import EngineError
from .simlab import SimConfig, SimSummary, WorkerModel, monte_carlo, run_experiment, simulate_worker
from .stats import (
    KWResult,
    SWResult,
    chi_square_sf,
    kruskal_wallis,
    median,
    normal_cdf,
    shapiro_wilk,
)
from .triage import (
    EnsembleScore,
    ModelVerdict,
    PolicyKind,
    RoutingPolicy,
    TriageDecision,
    TriageOutcome,
    ensemble_score,
    load_verdict_log,
    model_accuracy,
    route,
)

__version__ = "0.1.0"
