import random

import pytest

from veriloop.assignment import (
    AssignmentPolicy,
    Condition,
    WorkerProfile,
    build_same_race_assignments,
)
from veriloop.corpus import UnknownPair
from veriloop.errors import EngineError
from veriloop.simlab import (
    SimConfig,
    WorkerModel,
    load_config,
    monte_carlo,
    run_experiment,
    run_seed,
    simulate_worker,
    write_run_log,
)


def flat_model(race, p):
    return WorkerModel(race=race, accuracy_matrix={label: p for label in
                                                   ("African", "Asian", "Caucasian", "Indian")})


def one_assignment(manifest, quota=32, seed=1, race="Asian"):
    workers = [WorkerProfile("w", race, race, condition=Condition.SAME_RACE)]
    return build_same_race_assignments(workers, manifest, quota, seed)[0]


class TestSimulateWorker:
    def test_perfect_worker(self, manifest):
        a = one_assignment(manifest)
        verdicts = simulate_worker(flat_model("Asian", 1.0), a, manifest, random.Random(0))
        for v in verdicts:
            assert v.decision is manifest.require(v.pair_id).truth

    def test_anti_worker(self, manifest):
        a = one_assignment(manifest)
        verdicts = simulate_worker(flat_model("Asian", 0.0), a, manifest, random.Random(0))
        for v in verdicts:
            assert v.decision is manifest.require(v.pair_id).truth.flipped()

    def test_binomial_mean(self, manifest):
        a = one_assignment(manifest)
        truths = {p: manifest.require(p).truth for p in a.pair_ids}
        total_correct = 0
        n_streams = 10_000
        for i in range(n_streams):
            verdicts = simulate_worker(flat_model("Asian", 0.8), a, manifest, random.Random(i))
            total_correct += sum(1 for v in verdicts if v.decision is truths[v.pair_id])
        mean = total_correct / n_streams
        assert mean == pytest.approx(25.6, abs=0.2)

    def test_deterministic_given_stream(self, manifest):
        a = one_assignment(manifest)
        v1 = simulate_worker(flat_model("Asian", 0.7), a, manifest, random.Random(42))
        v2 = simulate_worker(flat_model("Asian", 0.7), a, manifest, random.Random(42))
        assert v1 == v2

    def test_unknown_pair(self, manifest, tiny_manifest):
        a = one_assignment(manifest)
        with pytest.raises(UnknownPair):
            simulate_worker(flat_model("Asian", 0.5), a, tiny_manifest, random.Random(0))

    def test_matrix_must_cover_labels(self, manifest):
        a = one_assignment(manifest)
        partial = WorkerModel(race="Asian", accuracy_matrix={"Asian": 0.9})
        # same-race assignment only touches Asian pairs, so this works
        simulate_worker(partial, a, manifest, random.Random(0))
        missing = WorkerModel(race="Asian", accuracy_matrix={"African": 0.9})
        with pytest.raises(EngineError):
            simulate_worker(missing, a, manifest, random.Random(0))


class TestRunSeed:
    def test_distinct_and_stable(self):
        seeds = {run_seed(42, i) for i in range(1000)}
        assert len(seeds) == 1000
        assert run_seed(42, 7) == run_seed(42, 7)
        assert run_seed(42, 7) != run_seed(43, 7)


class TestRunExperiment:
    def test_minimal_config(self, manifest):
        config = SimConfig(workers_per_race=1, quota=4, gold_count=0, seed=3)
        report = run_experiment(config, manifest, run_index=0)
        assert len(report.cells) == 8  # 2 conditions x 4 races
        for cell in report.cells:
            assert cell.count == 1

    def test_full_shape(self, manifest):
        config = SimConfig(workers_per_race=4, quota=16, gold_count=2, seed=3)
        report = run_experiment(config, manifest, run_index=1)
        assert len(report.races) == 4
        for rc in report.races:
            assert rc.control_median > 0

    def test_deterministic(self, manifest):
        config = SimConfig(workers_per_race=3, quota=8, gold_count=1, seed=11)
        a = run_experiment(config, manifest, run_index=5)
        b = run_experiment(config, manifest, run_index=5)
        assert a == b

    def test_gold_screening_path_exercised(self, manifest):
        # miss rate 1 - 0.6^2 = 64%: exclusions all but certain with 80 workers
        config = SimConfig(
            workers_per_race=10,
            quota=8,
            gold_count=2,
            own_race_accuracy=0.6,
            cross_race_accuracy=0.6,
            seed=2,
        )
        report = run_experiment(config, manifest, run_index=0)
        assert len(report.excluded_workers) > 0
        for _, reason in report.excluded_workers:
            assert reason.startswith("failed_gold:")


class TestMonteCarlo:
    def test_single_run_wraps_report(self, manifest):
        config = SimConfig(workers_per_race=2, quota=8, gold_count=0, seed=9, n_runs=1)
        summary = monte_carlo(config, manifest)
        assert summary.n_runs == 1
        assert len(summary.reports) == 1
        for outcome in summary.races:
            assert outcome.pct_diff_sd == 0.0

    def test_identical_config_identical_summary(self, manifest):
        config = SimConfig(workers_per_race=2, quota=8, gold_count=1, seed=4, n_runs=5)
        assert monte_carlo(config, manifest) == monte_carlo(config, manifest)

    def test_runs_are_order_independent(self, manifest):
        # a run computed in isolation equals the same run inside a batch
        config = SimConfig(workers_per_race=2, quota=8, gold_count=1, seed=4, n_runs=5)
        summary = monte_carlo(config, manifest)
        assert run_experiment(config, manifest, 3) == summary.reports[3]
        assert run_experiment(config, manifest, 0) == summary.reports[0]

    def test_direction_with_own_race_advantage(self, manifest):
        config = SimConfig(
            workers_per_race=20,
            quota=32,
            gold_count=2,
            own_race_accuracy=0.82,
            cross_race_accuracy=0.70,
            seed=101,
            n_runs=40,
        )
        summary = monte_carlo(config, manifest)
        for outcome in summary.races:
            assert outcome.same_race_wins_fraction >= 0.9
            assert outcome.pct_diff_mean > 0

    def test_uniform_matrix_is_symmetric(self, manifest):
        config = SimConfig(
            workers_per_race=20,
            quota=32,
            gold_count=2,
            own_race_accuracy=0.75,
            cross_race_accuracy=0.75,
            seed=55,
            n_runs=60,
        )
        summary = monte_carlo(config, manifest)
        for outcome in summary.races:
            assert abs(outcome.pct_diff_mean) < 4.0  # loose bound at 60 runs

    def test_monotone_in_own_race_accuracy(self, manifest):
        medians = []
        for own in (0.70, 0.78, 0.86):
            config = SimConfig(
                workers_per_race=12,
                quota=32,
                gold_count=0,
                own_race_accuracy=own,
                cross_race_accuracy=0.70,
                seed=7,
                n_runs=25,
            )
            summary = monte_carlo(config, manifest)
            mean_sr = sum(
                report.race("Asian").same_race_median for report in summary.reports
            ) / len(summary.reports)
            medians.append(mean_sr)
        assert medians[0] <= medians[1] <= medians[2]

    def test_run_log_format(self, manifest, tmp_path):
        config = SimConfig(workers_per_race=2, quota=8, gold_count=0, seed=1, n_runs=3)
        summary = monte_carlo(config, manifest)
        path = tmp_path / "runs.jsonl"
        write_run_log(summary, str(path))
        import json

        lines = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(lines) == 3 * 4
        assert {record["run"] for record in lines} == {0, 1, 2}
        assert set(lines[0]) == {
            "run",
            "race",
            "control_median",
            "same_race_median",
            "percentage_difference",
            "excluded",
        }


class TestConfigFile:
    def test_parse(self, tmp_path):
        path = tmp_path / "sim.cfg"
        path.write_text(
            "# comment\n"
            "workers_per_race=5\n"
            "quota = 16\n"
            "gold_count=1\n"
            "own_race_accuracy=0.9\n"
            "cross_race_accuracy=0.6\n"
            "policies=balanced,same_race\n"
            "seed=99\n"
            "n_runs=3\n"
            "manifest=pairs.jsonl\n"
        )
        config = load_config(str(path))
        assert config.workers_per_race == 5
        assert config.quota == 16
        assert config.policies == (AssignmentPolicy.BALANCED, AssignmentPolicy.SAME_RACE)
        assert config.manifest == "pairs.jsonl"

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "sim.cfg"
        path.write_text("wat=1\n")
        with pytest.raises(EngineError):
            load_config(str(path))

    def test_validation(self):
        with pytest.raises(EngineError):
            SimConfig(own_race_accuracy=1.2)
        with pytest.raises(EngineError):
            SimConfig(n_runs=0)
