import math

import numpy as np
import pytest

from aoi_sched.exact import PolicyTable, solve_finite_horizon
from aoi_sched.harness import (
    CSV_HEADER,
    ExperimentConfig,
    emit_csv,
    emit_trace_csv,
    expected_episode_cost,
    optimal_expected_episode_cost,
    read_csv,
    run_experiment,
    run_replication,
)
from aoi_sched.learn import Algorithm, InitialStateMode
from aoi_sched.model import ConfigError, ProblemInstance

from conftest import FIG2


def small_cfg(**kw):
    inst = ProblemInstance(**FIG2, horizon=10, num_episodes=kw.pop("K", 30))
    kw.setdefault("replications", 3)
    return ExperimentConfig(inst, **kw)


class TestOptimalCost:
    def test_single_slot(self):
        inst = ProblemInstance(**FIG2, horizon=1)
        assert optimal_expected_episode_cost(inst, 3) == pytest.approx(0.4 * 3)

    def test_pinned_age(self):
        inst = ProblemInstance(1, (1 - 1e-12,), 5, 2.0, 1.0, horizon=3)
        always = PolicyTable(np.ones((3, 5), dtype=int))
        assert expected_episode_cost(inst, 1, always) == pytest.approx(3.0, abs=1e-9)

    def test_matches_monte_carlo(self):
        inst = ProblemInstance(**FIG2, horizon=12)
        policy = solve_finite_horizon(inst).policy
        exact = optimal_expected_episode_cost(inst, 5, policy)
        rng = np.random.default_rng(8)
        n = 100_000
        mu = np.concatenate([[0.0], inst.mu_array])
        s = np.full(n, 5)
        totals = np.zeros(n)
        for h in range(inst.horizon):
            a = policy.actions[h, s - 1]
            totals += inst.cost_table[s - 1, a]
            reset = rng.random(n) < mu[a]
            s = np.where(reset, 1, np.minimum(s + 1, inst.a_max))
        se = totals.std(ddof=1) / math.sqrt(n)
        assert abs(totals.mean() - exact) < 3 * se


class TestExperiment:
    def test_optimal_learner_has_zero_expected_regret(self):
        trace = run_experiment(small_cfg(algorithm=Algorithm.OPTIMAL), workers=1)
        assert np.all(trace.episode_regret == 0.0)

    def test_optimal_learner_realized_regret_centered(self):
        errors = []
        for R in (4, 16):
            trace = run_experiment(
                small_cfg(algorithm=Algorithm.OPTIMAL, replications=R, K=50, regret_estimator="realized"),
                workers=1)
            assert abs(trace.mean_cum_regret[-1]) < 4 * trace.stderr[-1]
            errors.append(trace.stderr[-1])
        assert errors[1] < errors[0]

    def test_regret_additivity(self):
        trace = run_experiment(small_cfg(algorithm=Algorithm.ALG2), workers=1)
        np.testing.assert_allclose(trace.cum_regret, np.cumsum(trace.episode_regret, axis=1))
        np.testing.assert_allclose(trace.mean_cum_regret, trace.cum_regret.mean(axis=0))
        np.testing.assert_allclose(
            trace.mean_episode_cost - trace.optimal_episode_cost, trace.episode_regret.mean(axis=0))

    def test_stderr(self):
        trace = run_experiment(small_cfg(algorithm=Algorithm.ALG1, replications=5), workers=1)
        expected = trace.cum_regret.std(axis=0, ddof=1) / math.sqrt(5)
        np.testing.assert_allclose(trace.stderr, expected)
        single = run_experiment(small_cfg(replications=1), workers=1)
        assert np.all(np.isnan(single.stderr))

    def test_reproducible(self, tmp_path):
        cfg = small_cfg(algorithm=Algorithm.ALG1, K=20)
        a = emit_csv(run_experiment(cfg, workers=1), tmp_path / "a.csv").read_bytes()
        b = emit_csv(run_experiment(cfg, workers=2), tmp_path / "b.csv").read_bytes()
        assert a == b

    def test_replications_differ(self):
        trace = run_experiment(small_cfg(algorithm=Algorithm.ALG2, replications=4, K=40), workers=1)
        rows = {tuple(r) for r in trace.episode_regret}
        assert len(rows) == 4

    def test_replication_seed(self):
        cfg = small_cfg(algorithm=Algorithm.UCBVI, K=10)
        a = run_replication(cfg, 2)[0]
        b = run_replication(ExperimentConfig(cfg.instance, Algorithm.UCBVI, base_seed=2), 0)[0]
        np.testing.assert_array_equal(a, b)

    def test_nr_mode_benchmark_from_chained_state(self):
        cfg = small_cfg(algorithm=Algorithm.ALG2, initial_state_mode=InitialStateMode.NR,
                        record_trace=True, replications=1, K=5)
        trace = run_experiment(cfg, workers=1)
        rows = trace.trace_rows
        first_states = [int(r[2]) for r in rows if r[1] == 1]
        assert first_states[0] == 1
        optimal = solve_finite_horizon(cfg.instance).policy
        for k, s0 in enumerate(first_states):
            assert trace.optimal_episode_cost[k] == pytest.approx(
                optimal_expected_episode_cost(cfg.instance, s0, optimal))

    def test_duplicate_best_channel_rejected(self):
        inst = ProblemInstance(2, (0.5, 0.5), 5, 1.0, 0.5, horizon=3, num_episodes=2)
        with pytest.raises(ConfigError):
            run_experiment(ExperimentConfig(inst, replications=1))

    @pytest.mark.parametrize("field, value", [
        ("replications", 0), ("regret_estimator", "other"), ("theta0_constant", 0.0)])
    def test_config_validation(self, field, value):
        with pytest.raises(ConfigError) as info:
            small_cfg(**{field: value})
        assert info.value.key == field


class TestCsv:
    def test_row_count_and_header(self, tmp_path):
        trace = run_experiment(small_cfg(K=3), workers=1)
        path = emit_csv(trace, tmp_path / "r.csv")
        lines = path.read_text().splitlines()
        assert len(lines) == 4
        assert lines[0] == ",".join(CSV_HEADER)

    def test_reemit_identical(self, tmp_path):
        trace = run_experiment(small_cfg(K=5), workers=1)
        a = emit_csv(trace, tmp_path / "a.csv").read_bytes()
        b = emit_csv(trace, tmp_path / "b.csv").read_bytes()
        assert a == b

    def test_round_trip(self, tmp_path):
        trace = run_experiment(small_cfg(K=8), workers=1)
        back = read_csv(emit_csv(trace, tmp_path / "r.csv"))
        np.testing.assert_array_equal(back["mean_cum_regret"], trace.mean_cum_regret)
        np.testing.assert_array_equal(back["stderr"], trace.stderr)
        np.testing.assert_array_equal(back["mean_episode_cost"], trace.mean_episode_cost)
        np.testing.assert_array_equal(back["optimal_episode_cost"], trace.optimal_episode_cost)
        np.testing.assert_array_equal(back["episode"], np.arange(1, 9))

    def test_io_error_names_path(self, tmp_path):
        trace = run_experiment(small_cfg(K=2), workers=1)
        bad = tmp_path / "missing" / "r.csv"
        with pytest.raises(OSError, match="missing"):
            emit_csv(trace, bad)

    def test_trace_csv(self, tmp_path):
        cfg = small_cfg(K=2, record_trace=True, replications=1)
        path = emit_trace_csv(run_experiment(cfg, workers=1), tmp_path / "t.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "k,h,s,a,cost,pilot_channel,pilot_success"
        assert len(lines) == 1 + 2 * cfg.instance.horizon
