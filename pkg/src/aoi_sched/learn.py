"""Episodic learners for unknown channel reliabilities.

Three planners share one bookkeeping type (:class:`LearnerState`) and one
episode runner:

* ``alg1``: optimistic backward induction on a pooled per-channel estimate,
  with a UCB-style bonus during the first ``theta0`` episodes and Q-values
  that never increase across episodes. Drop slots send a pilot over a random
  channel.
* ``alg2``: the same estimate and pilots, plain backward induction, no bonus.
* ``ucbvi``: the AoI-agnostic baseline; per-(s, a) empirical kernel, bonus
  always on, no pilots.

Planning works on the normalized reward in ``[0, 1]``; episode logs also carry
the cost of each step so regret can be reported in cost units.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exact import PolicyTable, expected_next_values, greedy_actions, solve_finite_horizon
from .model import ProblemInstance, transition_tensor


class Algorithm(str, enum.Enum):
    ALG1 = "alg1"
    ALG2 = "alg2"
    UCBVI = "ucbvi"
    OPTIMAL = "optimal"  # the exact finite-horizon policy; regret reference


class InitialStateMode(str, enum.Enum):
    UNIFORM = "uniform"
    NR = "nr"


def theta0(num_channels: int, delta: float, constant: float = 1.0) -> int:
    """Length of the bonus phase: ``ceil(constant * C^2 * ln(2C / delta))``."""
    return math.ceil(constant * num_channels**2 * math.log(2 * num_channels / delta))


def bonus_scale(inst: ProblemInstance) -> float:
    S, A, T = inst.num_states, inst.num_actions, inst.total_steps
    return 7 * inst.horizon * math.log(5 * S * A * T / inst.delta)


def exploration_bonus(inst: ProblemInstance, counts) -> np.ndarray:
    """``7 H ln(5 S A T / delta) / sqrt(max(N, 1))`` elementwise."""
    return bonus_scale(inst) / np.sqrt(np.maximum(np.asarray(counts, dtype=float), 1.0))


def channel_gaps(inst: ProblemInstance) -> tuple[float, float]:
    """``(delta_min, Delta_min)``: distance of each reliability to the normalized
    power/age ratio, and the reliability gap between the best channel and the rest."""
    mu = inst.mu_array
    if inst.alpha == 0:
        delta_min = math.inf
    else:
        ratio = (1 - inst.alpha) * inst.power_cost / (inst.alpha * inst.a_max)
        delta_min = float(np.min(np.abs(ratio - mu)))
    k = inst.best_channel - 1
    others = np.delete(mu, k)
    gap_min = float(np.min(np.abs(mu[k] - others))) if others.size else math.inf
    return delta_min, gap_min


@dataclass
class LearnerState:
    triple_counts: np.ndarray      # N(s, a, s') as [s-1, a, s'-1]
    channel_attempts: np.ndarray   # per channel, real transmissions + pilots
    channel_successes: np.ndarray
    q_table: np.ndarray            # (H, S, A), reward units
    v_table: np.ndarray            # (H + 1, S)
    episode_index: int = 1
    theta0: float = 0.0

    @classmethod
    def fresh(cls, inst: ProblemInstance, theta0_constant: float = 1.0) -> "LearnerState":
        S, A, H = inst.num_states, inst.num_actions, inst.horizon
        return cls(
            triple_counts=np.zeros((S, A, S), dtype=np.int64),
            channel_attempts=np.zeros(inst.num_channels, dtype=np.int64),
            channel_successes=np.zeros(inst.num_channels, dtype=np.int64),
            q_table=np.full((H, S, A), float(H)),
            v_table=np.zeros((H + 1, S)),
            episode_index=1,
            theta0=theta0(inst.num_channels, inst.delta, theta0_constant),
        )

    @property
    def visit_counts(self) -> np.ndarray:
        return self.triple_counts.sum(axis=2)

    @property
    def bonus_active(self) -> bool:
        return self.episode_index <= self.theta0


@dataclass(frozen=True)
class EstimatedKernel:
    failure_probs: np.ndarray  # T(a) for a = 1..C

    @property
    def success_probs(self) -> np.ndarray:
        return 1.0 - self.failure_probs

    def matrix(self, inst: ProblemInstance) -> np.ndarray:
        return transition_tensor(inst, self.success_probs)


def estimate_kernel(ls: LearnerState, inst: ProblemInstance) -> EstimatedKernel:
    """Pool failure counts over states for each channel; unvisited channels are assumed perfect."""
    S = inst.num_states
    fails = ls.triple_counts[np.arange(S), :, inst.next_if_fail].sum(axis=0)[1:]
    totals = ls.triple_counts.sum(axis=(0, 2))[1:]
    with np.errstate(invalid="ignore", divide="ignore"):
        est = np.where(totals > 0, fails / np.maximum(totals, 1), 0.0)
    return EstimatedKernel(est)


@dataclass(frozen=True)
class Plan:
    policy: PolicyTable
    q_values: Optional[np.ndarray] = None
    v_values: Optional[np.ndarray] = None
    kernel: Optional[EstimatedKernel] = None


def _plan_from_q(q: np.ndarray, v: np.ndarray, kernel=None) -> Plan:
    return Plan(PolicyTable(greedy_actions(q, maximize=True)), q, v, kernel)


def plan_episode_alg1(ls: LearnerState, inst: ProblemInstance, success_probs=None) -> Plan:
    """Optimistic plan: Q = min(previous Q, H, r + E[V'] + bonus * [k <= theta0]).

    ``success_probs`` replaces the learned estimate (used to check the planner
    against exact backward induction).
    """
    kernel = estimate_kernel(ls, inst) if success_probs is None else EstimatedKernel(
        1.0 - np.asarray(success_probs, dtype=float))
    H = inst.horizon
    bonus = exploration_bonus(inst, ls.visit_counts) if ls.bonus_active else 0.0
    mu = kernel.success_probs
    q = np.empty_like(ls.q_table)
    v = np.zeros((H + 1, inst.num_states))
    for h in range(H - 1, -1, -1):
        target = inst.reward_table + expected_next_values(inst, v[h + 1], mu) + bonus
        q[h] = np.minimum(np.minimum(ls.q_table[h], float(H)), target)
        v[h] = q[h].max(axis=1)
    return _plan_from_q(q, v, kernel)


def plan_episode_alg2(ls: LearnerState, inst: ProblemInstance, success_probs=None) -> Plan:
    kernel = estimate_kernel(ls, inst) if success_probs is None else EstimatedKernel(
        1.0 - np.asarray(success_probs, dtype=float))
    H = inst.horizon
    mu = kernel.success_probs
    q = np.empty((H, inst.num_states, inst.num_actions))
    v = np.zeros((H + 1, inst.num_states))
    for h in range(H - 1, -1, -1):
        q[h] = inst.reward_table + expected_next_values(inst, v[h + 1], mu)
        v[h] = q[h].max(axis=1)
    return _plan_from_q(q, v, kernel)


def empirical_kernel(ls: LearnerState) -> np.ndarray:
    """Per-(s, a) empirical next-state frequencies; uniform rows where unvisited."""
    counts = ls.triple_counts.astype(float)
    n = counts.sum(axis=2, keepdims=True)
    S = counts.shape[2]
    return np.where(n > 0, counts / np.maximum(n, 1.0), 1.0 / S)


def plan_episode_ucbvi(ls: LearnerState, inst: ProblemInstance) -> Plan:
    H = inst.horizon
    p_hat = empirical_kernel(ls)
    bonus = exploration_bonus(inst, ls.visit_counts)
    q = np.empty_like(ls.q_table)
    v = np.zeros((H + 1, inst.num_states))
    for h in range(H - 1, -1, -1):
        target = inst.reward_table + p_hat @ v[h + 1] + bonus
        q[h] = np.minimum(np.minimum(ls.q_table[h], float(H)), target)
        v[h] = q[h].max(axis=1)
    return _plan_from_q(q, v)


def plan_optimal(inst: ProblemInstance) -> Plan:
    return Plan(solve_finite_horizon(inst).policy)


def plan_episode(algorithm: Algorithm, ls: LearnerState, inst: ProblemInstance,
                 optimal: Optional[Plan] = None) -> Plan:
    algorithm = Algorithm(algorithm)
    if algorithm is Algorithm.ALG1:
        return plan_episode_alg1(ls, inst)
    if algorithm is Algorithm.ALG2:
        return plan_episode_alg2(ls, inst)
    if algorithm is Algorithm.UCBVI:
        return plan_episode_ucbvi(ls, inst)
    return optimal if optimal is not None else plan_optimal(inst)


def uses_pilots(algorithm: Algorithm) -> bool:
    return Algorithm(algorithm) in (Algorithm.ALG1, Algorithm.ALG2)


@dataclass
class EpisodeLog:
    initial_state: int
    states: np.ndarray          # state at the start of each step
    actions: np.ndarray
    rewards: np.ndarray
    costs: np.ndarray
    pilot_channels: np.ndarray  # 0 when no pilot was sent
    pilot_success: np.ndarray   # -1 when no pilot was sent
    final_state: int

    @property
    def total_cost(self) -> float:
        return float(self.costs.sum())

    def csv_rows(self, episode: int):
        for h in range(len(self.states)):
            pc = int(self.pilot_channels[h])
            yield (
                episode, h + 1, int(self.states[h]), int(self.actions[h]),
                f"{self.costs[h]:.17g}",
                str(pc) if pc else "",
                str(int(self.pilot_success[h])) if pc else "",
            )


TRACE_HEADER = ("k", "h", "s", "a", "cost", "pilot_channel", "pilot_success")


def run_episode(inst: ProblemInstance, ls: LearnerState, plan: Plan, initial: int,
                rng: np.random.Generator, pilots: bool = True) -> tuple[EpisodeLog, LearnerState]:
    """Play ``plan`` for one episode from ``initial`` and fold the observations into ``ls``.

    Counts are applied after the last step. Each drop slot with pilots enabled
    probes a uniformly chosen channel ``c`` and records the outcome as the
    transition ``(s, c, 1)`` or ``(s, c, s+)``, so pilots feed that channel's
    estimate. ``ls`` is updated in place and returned.
    """
    H, S, C = inst.horizon, inst.a_max, inst.num_channels
    inst.check_state(initial)
    if plan.policy.actions.shape[0] != H:
        raise ValueError("plan length does not match the horizon")
    actions_table = plan.policy.actions
    mu = inst.success_probs
    cost_table = inst.cost_table
    reward_table = inst.reward_table

    u_tx = rng.random(H)
    pilot_ch = rng.integers(1, C + 1, size=H)
    u_pilot = rng.random(H)

    states = np.empty(H, dtype=np.int64)
    acts = np.empty(H, dtype=np.int64)
    costs = np.empty(H)
    rewards = np.empty(H)
    p_chan = np.zeros(H, dtype=np.int64)
    p_ok = np.full(H, -1, dtype=np.int8)
    observed = []  # (s, a, s') triples, 1-based states

    s = initial
    for h in range(H):
        a = int(actions_table[h, s - 1])
        states[h] = s
        acts[h] = a
        costs[h] = cost_table[s - 1, a]
        rewards[h] = reward_table[s - 1, a]
        s_plus = s + 1 if s < S else S
        if a == 0:
            nxt = s_plus
            if pilots:
                c = int(pilot_ch[h])
                ok = u_pilot[h] < mu[c - 1]
                p_chan[h] = c
                p_ok[h] = ok
                observed.append((s, c, 1 if ok else s_plus))
        else:
            nxt = 1 if u_tx[h] < mu[a - 1] else s_plus
            observed.append((s, a, nxt))
        s = nxt

    for s0, a, s1 in observed:
        ls.triple_counts[s0 - 1, a, s1 - 1] += 1
        if a > 0:
            ls.channel_attempts[a - 1] += 1
            ls.channel_successes[a - 1] += s1 == 1
    if plan.q_values is not None:
        ls.q_table = plan.q_values
        ls.v_table = plan.v_values
    ls.episode_index += 1
    log = EpisodeLog(initial, states, acts, rewards, costs, p_chan, p_ok, s)
    return log, ls


def initial_state_rule(mode: InitialStateMode, inst: ProblemInstance, prev_final: Optional[int],
                       rng: np.random.Generator, episode: int = 1) -> int:
    mode = InitialStateMode(mode)
    if mode is InitialStateMode.UNIFORM:
        return int(rng.integers(1, inst.a_max + 1))
    if prev_final is None:
        if episode == 1:
            return 1
        raise ValueError(f"NR mode needs the previous episode's final state (episode {episode})")
    return int(prev_final)
