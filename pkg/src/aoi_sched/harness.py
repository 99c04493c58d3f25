"""Regret experiments: learners against the exact finite-horizon optimum.

Per-episode regret is the learner's episode cost minus the exact expected
cost of the optimal policy from the same initial state. The learner's cost is
either its exact expected cost given the plan it committed to for that episode
(``regret_estimator="expected"``, the default) or the cost it actually
incurred (``"realized"``). Both are unbiased for the expected regret; the
first drops the within-episode channel noise, so a learner that has settled on
the optimal policy accrues exactly zero further regret. Replication
``r`` is seeded with ``base_seed + r``; replications run in worker processes
(capped by ``AOI_SCHED_THREADS``) and are reduced in replication order, so
results do not depend on scheduling.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .exact import PolicyTable, solve_finite_horizon
from .learn import (
    TRACE_HEADER,
    Algorithm,
    InitialStateMode,
    LearnerState,
    Plan,
    channel_gaps,
    initial_state_rule,
    plan_episode,
    run_episode,
    uses_pilots,
)
from .model import ConfigError, ProblemInstance

CSV_HEADER = ("episode", "mean_cum_regret", "stderr", "mean_episode_cost", "optimal_episode_cost")


@dataclass(frozen=True)
class ExperimentConfig:
    instance: ProblemInstance
    algorithm: Algorithm = Algorithm.ALG1
    initial_state_mode: InitialStateMode = InitialStateMode.UNIFORM
    replications: int = 20
    base_seed: int = 0
    record_trace: bool = False
    theta0_constant: float = 1.0
    regret_estimator: str = "expected"

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        object.__setattr__(self, "initial_state_mode", InitialStateMode(self.initial_state_mode))
        if self.replications < 1:
            raise ConfigError("replications", "must be >= 1")
        if self.regret_estimator not in ("expected", "realized"):
            raise ConfigError("regret_estimator", "must be 'expected' or 'realized'")
        if self.theta0_constant <= 0:
            raise ConfigError("theta0_constant", "must be positive")


@dataclass
class RegretTrace:
    mean_cum_regret: np.ndarray
    stderr: np.ndarray
    mean_episode_cost: np.ndarray
    optimal_episode_cost: np.ndarray
    episode_regret: np.ndarray = field(repr=False)  # (R, K)
    theta0: Optional[int] = None
    trace_rows: Optional[list] = field(default=None, repr=False)

    @property
    def num_episodes(self) -> int:
        return len(self.mean_cum_regret)

    @property
    def cum_regret(self) -> np.ndarray:
        """Per-replication cumulative regret, shape (R, K)."""
        return np.cumsum(self.episode_regret, axis=1)


def expected_episode_cost(inst: ProblemInstance, initial: int, policy: PolicyTable) -> float:
    """Exact expected cost of one episode of a per-step ``policy`` started at ``initial``.

    Propagates the state distribution forward for ``H`` steps; no sampling.
    """
    inst.check_state(initial)
    S = inst.num_states
    rows = np.arange(S)
    mu = np.concatenate([[0.0], inst.mu_array])  # success prob per action; drop never resets
    dist = np.zeros(S)
    dist[initial - 1] = 1.0
    total = 0.0
    for h in range(inst.horizon):
        acts = policy.actions[h]
        total += float(dist @ inst.cost_table[rows, acts])
        succ = dist * mu[acts]
        fail = dist - succ
        dist = np.empty(S)
        dist[0] = succ.sum()
        dist[1:] = fail[:-1]
        dist[-1] += fail[-1]
    return total


def optimal_expected_episode_cost(inst: ProblemInstance, initial: int,
                                  policy: Optional[PolicyTable] = None) -> float:
    if policy is None:
        policy = solve_finite_horizon(inst).policy
    return expected_episode_cost(inst, initial, policy)


def _check_instance(cfg: ExperimentConfig) -> None:
    _, gap = channel_gaps(cfg.instance)
    if gap == 0:
        raise ConfigError("success_probs", "best channel is not unique (Delta_min = 0)")


def run_replication(cfg: ExperimentConfig, replication: int):
    """One independent learner run: (learner episode costs, optimal expected costs, trace rows)."""
    inst = cfg.instance
    rng = np.random.default_rng(cfg.base_seed + replication)
    optimal = solve_finite_horizon(inst)
    opt_plan = Plan(optimal.policy)
    opt_costs = np.array([
        optimal_expected_episode_cost(inst, s, optimal.policy) for s in range(1, inst.a_max + 1)
    ])
    ls = LearnerState.fresh(inst, cfg.theta0_constant)
    pilots = uses_pilots(cfg.algorithm)
    expected = cfg.regret_estimator == "expected"
    K = inst.num_episodes
    learner = np.empty(K)
    bench = np.empty(K)
    rows = [] if cfg.record_trace else None
    prev_final = None
    for k in range(1, K + 1):
        s0 = initial_state_rule(cfg.initial_state_mode, inst, prev_final, rng, k)
        plan = plan_episode(cfg.algorithm, ls, inst, opt_plan)
        log, ls = run_episode(inst, ls, plan, s0, rng, pilots=pilots)
        if expected:
            learner[k - 1] = expected_episode_cost(inst, s0, plan.policy)
        else:
            learner[k - 1] = log.total_cost
        bench[k - 1] = opt_costs[s0 - 1]
        prev_final = log.final_state
        if rows is not None:
            rows.extend(log.csv_rows(k))
    return learner, bench, rows


def _worker_count(replications: int) -> int:
    env = os.environ.get("AOI_SCHED_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, replications))


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None) -> RegretTrace:
    _check_instance(cfg)
    R = cfg.replications
    workers = _worker_count(R) if workers is None else max(1, min(workers, R))
    if workers == 1:
        results = [run_replication(cfg, r) for r in range(R)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_replication, [cfg] * R, range(R)))
    learner = np.stack([res[0] for res in results])
    bench = np.stack([res[1] for res in results])
    regret = learner - bench
    cum = np.cumsum(regret, axis=1)
    if R > 1:
        stderr = cum.std(axis=0, ddof=1) / math.sqrt(R)
    else:
        stderr = np.full(cum.shape[1], np.nan)
    theta = None
    if cfg.algorithm is Algorithm.ALG1:
        theta = LearnerState.fresh(cfg.instance, cfg.theta0_constant).theta0
    return RegretTrace(
        mean_cum_regret=cum.mean(axis=0),
        stderr=stderr,
        mean_episode_cost=learner.mean(axis=0),
        optimal_episode_cost=bench.mean(axis=0),
        episode_regret=regret,
        theta0=theta,
        trace_rows=results[0][2],
    )


def emit_csv(trace: RegretTrace, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for k in range(trace.num_episodes):
                writer.writerow((
                    k + 1,
                    f"{trace.mean_cum_regret[k]:.17g}",
                    f"{trace.stderr[k]:.17g}",
                    f"{trace.mean_episode_cost[k]:.17g}",
                    f"{trace.optimal_episode_cost[k]:.17g}",
                ))
    except OSError as exc:
        raise OSError(f"cannot write regret CSV to {path}: {exc.strerror}") from exc
    return path


def emit_trace_csv(trace: RegretTrace, path) -> Path:
    """Per-step log of replication 0 (needs ``record_trace``)."""
    if trace.trace_rows is None:
        raise ValueError("experiment was run without record_trace")
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        writer.writerows(trace.trace_rows)
    return path


def read_csv(path) -> dict:
    with Path(path).open() as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    return {key: np.array([float(r[key]) for r in rows]) for key in CSV_HEADER}
