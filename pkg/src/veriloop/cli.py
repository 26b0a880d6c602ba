"""Operator command line: triage, assign, simulate, report, serve, stats.

Every subcommand except `serve` is a thin shell over a pure-module call;
identical inputs produce identical outputs and exit codes. Exit codes:
0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import os
import random
import sys

from . import simlab
from .aggregate import render_report
from .assignment import (
    AssignmentPolicy,
    RaceCodingTable,
    WorkerProfile,
    build_control_assignments,
    build_same_race_assignments,
    code_race,
    inject_gold,
    save_assignments,
)
from .corpus import load_manifest, stratum
from .errors import EngineError
from .jsonl import read_records, require_fields
from .seeds import derived_seed
from .triage import (
    RoutingPolicy,
    ensemble_score,
    group_by_pair,
    load_verdict_log,
    route,
    write_outcome,
)

DEFAULT_PORT = 8410
PORT_ENV_VAR = "VERILOOP_PORT"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="veriloop")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_triage = sub.add_parser("triage", help="score a verdict log and route pairs")
    p_triage.add_argument("--manifest", required=True)
    p_triage.add_argument("--verdicts", required=True)
    p_triage.add_argument("--policy", default="uncertain_all")
    p_triage.add_argument("--tau", type=float, default=None)
    p_triage.add_argument("--out", required=True)

    p_assign = sub.add_parser("assign", help="build task assignments for workers")
    p_assign.add_argument("--manifest", required=True)
    p_assign.add_argument("--workers", required=True)
    p_assign.add_argument("--policy", default="same_race")
    p_assign.add_argument("--quota", type=int, default=32)
    p_assign.add_argument("--gold-count", type=int, default=0)
    p_assign.add_argument("--seed", type=int, default=0)
    p_assign.add_argument("--coding-table", default=None)
    p_assign.add_argument("--out", required=True)

    p_sim = sub.add_parser("simulate", help="run seeded synthetic-worker replications")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--manifest", default=None)
    p_sim.add_argument("--out", required=True)

    p_report = sub.add_parser("report", help="recompute a report from a gateway log directory")
    p_report.add_argument("--log", required=True)

    p_serve = sub.add_parser("serve", help="run the task gateway service")
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--experiment", required=True)
    p_serve.add_argument("--manifest", default=None)
    p_serve.add_argument("--data-dir", required=True)
    p_serve.add_argument("--policies", default="balanced,same_race")
    p_serve.add_argument("--quota", type=int, default=32)
    p_serve.add_argument("--gold-count", type=int, default=2)
    p_serve.add_argument("--seed", type=int, default=0)
    p_serve.add_argument("--replication-mode", action="store_true")
    p_serve.add_argument("--coding-table", default=None)

    p_stats = sub.add_parser("stats", help="statistical tests over standard input")
    p_stats.add_argument("test", choices=["kw", "sw"])

    return parser


def _load_workers(path: str, table: RaceCodingTable) -> list[WorkerProfile]:
    workers = []
    for line_no, record in read_records(path):
        require_fields(line_no, record, ("worker_id", "self_identified_race"))
        self_id = str(record["self_identified_race"])
        workers.append(
            WorkerProfile(
                worker_id=str(record["worker_id"]),
                self_identified_race=self_id,
                coded_race=code_race(self_id, table),
                prior_experience=bool(record.get("prior_experience", False)),
            )
        )
    return workers


def _cmd_triage(args) -> int:
    manifest = load_manifest(args.manifest)
    verdicts = load_verdict_log(args.verdicts)
    for v in verdicts:
        manifest.require(v.pair_id)
    policy = RoutingPolicy.from_flags(args.policy, args.tau)
    scores = [ensemble_score(group) for group in group_by_pair(verdicts).values()]
    outcome = route(scores, policy)
    write_outcome(outcome, args.out)
    print(f"finalized {len(outcome.auto_finalized)}, routed {len(outcome.routed)}")
    return 0


def _cmd_assign(args) -> int:
    manifest = load_manifest(args.manifest)
    if args.coding_table:
        table = RaceCodingTable.load(args.coding_table, manifest.label_set)
    else:
        table = RaceCodingTable.default(manifest.label_set)
    workers = _load_workers(args.workers, table)
    policy = AssignmentPolicy.parse(args.policy)

    gold_pool = {}
    assignable = manifest
    if args.gold_count > 0:
        gold_ids = set()
        for label in manifest.label_set:
            rng = random.Random(derived_seed(args.seed, "gold", label))
            pool = rng.sample(stratum(manifest, label), args.gold_count)
            gold_pool[label] = pool
            gold_ids.update(p.pair_id for p in pool)
        assignable = manifest.without(gold_ids)

    if policy is AssignmentPolicy.SAME_RACE:
        assignments = build_same_race_assignments(workers, assignable, args.quota, args.seed)
    else:
        assignments = build_control_assignments(workers, assignable, args.quota, args.seed)

    if args.gold_count > 0:
        by_id = {w.worker_id: w for w in workers}
        labels = manifest.label_set.labels
        updated = []
        for a in assignments:
            race = by_id[a.worker_id].coded_race
            if isinstance(race, str):
                pool = gold_pool[race]
            else:
                pool = gold_pool[labels[derived_seed(args.seed, "goldlabel", a.worker_id) % len(labels)]]
            updated.append(
                inject_gold(a, pool, args.gold_count, derived_seed(args.seed, "inject", a.worker_id))
            )
        assignments = updated
    save_assignments(assignments, args.out)
    print(f"built {len(assignments)} assignments")
    return 0


def _cmd_simulate(args) -> int:
    config = simlab.load_config(args.config)
    manifest_path = args.manifest or config.manifest
    if not manifest_path:
        raise EngineError("no manifest: pass --manifest or set manifest= in the config")
    manifest = load_manifest(manifest_path)
    summary = simlab.monte_carlo(config, manifest)
    simlab.write_run_log(summary, args.out)
    print(simlab.render_summary(summary), end="")
    return 0


def _cmd_report(args) -> int:
    from .gateway import GatewayService

    service = GatewayService(args.log, durable=False)
    try:
        report = service.fetch_report(service.state.experiment_id)
        print(render_report(report), end="")
    finally:
        service.close()
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .gateway import ExperimentState, ExperimentStatus, GatewayService
    from .webapi import create_app

    port = args.port
    if port is None:
        port = int(os.environ.get(PORT_ENV_VAR, DEFAULT_PORT))

    state = None
    if not os.path.exists(os.path.join(args.data_dir, "experiment.json")):
        if not args.manifest:
            raise EngineError("--manifest is required when creating a new experiment")
        import time

        state = ExperimentState(
            experiment_id=args.experiment,
            manifest_ref=args.manifest,
            routing_policy="",
            assignment_policies=tuple(
                AssignmentPolicy.parse(p.strip()) for p in args.policies.split(",") if p.strip()
            ),
            status=ExperimentStatus.OPEN,
            created_at=time.time(),
            quota=args.quota,
            gold_count=args.gold_count,
            seed=args.seed,
            replication_mode=args.replication_mode,
        )
    table = None
    service = GatewayService(args.data_dir, state=state)
    if args.coding_table:
        table = RaceCodingTable.load(args.coding_table, service.manifest.label_set)
        service.coding_table = table
    try:
        uvicorn.run(create_app(service), host="127.0.0.1", port=port, log_level="warning")
    finally:
        service.close()
    return 0


def _cmd_stats(args) -> int:
    from . import stats

    if args.test == "kw":
        groups = []
        for line in sys.stdin:
            values = [float(tok) for tok in line.split()]
            if values:
                groups.append(values)
        result = stats.kruskal_wallis(groups)
        print(f"H={result.H:.4f} df={result.df} p={result.p_value:.4f}")
    else:
        values = [float(tok) for tok in sys.stdin.read().split()]
        result = stats.shapiro_wilk(values)
        print(f"W={result.W:.4f} p={result.p_value:.4f}")
    return 0


_COMMANDS = {
    "triage": _cmd_triage,
    "assign": _cmd_assign,
    "simulate": _cmd_simulate,
    "report": _cmd_report,
    "serve": _cmd_serve,
    "stats": _cmd_stats,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return _COMMANDS[args.subcommand](args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
