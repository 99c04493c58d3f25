"""Exact solvers for known channel statistics.

Average-cost relative value iteration, finite-horizon backward induction, the
closed-form optimal average cost of a threshold policy, and checks of the
structural properties (monotone value function, single-channel threshold
policy) that the optimal policy must satisfy.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .model import ProblemInstance

TIE_RTOL = 1e-9


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class PolicyTable:
    """Deterministic policy: ``actions[s-1]`` if stationary, else ``actions[h-1, s-1]``."""

    actions: np.ndarray

    @property
    def stationary(self) -> bool:
        return self.actions.ndim == 1

    def action(self, s: int, h: Optional[int] = None) -> int:
        if self.stationary:
            return int(self.actions[s - 1])
        return int(self.actions[h - 1, s - 1])


@dataclass
class SolveResult:
    rho_star: float
    value_fn: np.ndarray
    q_table: np.ndarray
    policy: PolicyTable
    threshold: int
    best_channel: int
    iterations: int = 0
    bellman_residual: float = 0.0


@dataclass(frozen=True)
class StationaryDistribution:
    gamma: np.ndarray


class FiniteHorizonSolution(NamedTuple):
    policy: PolicyTable
    values: np.ndarray  # (H + 1, S); row H is the terminal zero vector


def greedy_actions(q: np.ndarray, maximize: bool = False) -> np.ndarray:
    """Row-wise arg-opt over the last axis, preferring lower action indices on near-ties.

    Values within ``TIE_RTOL`` (relative to the row's magnitude) of the best
    count as ties, so drop (action 0) wins ties, then the lowest channel.
    """
    best = q.max(axis=-1, keepdims=True) if maximize else q.min(axis=-1, keepdims=True)
    tol = TIE_RTOL * np.maximum(1.0, np.abs(best))
    close = q >= best - tol if maximize else q <= best + tol
    return np.argmax(close, axis=-1)


def expected_next_values(inst: ProblemInstance, v: np.ndarray, success_probs=None) -> np.ndarray:
    """``E[v(s') | s, a]`` for all (s, a) under the structured AoI kernel."""
    mu = inst.mu_array if success_probs is None else success_probs
    v_next = v[inst.next_if_fail]
    out = np.empty((inst.num_states, inst.num_actions))
    out[:, 0] = v_next
    out[:, 1:] = v_next[:, None]
    out[:, 1:] += mu * (v[0] - v_next[:, None])
    return out


def extract_threshold(actions: np.ndarray) -> int:
    """Largest state with a drop decision; 0 if the policy never drops."""
    drops = np.flatnonzero(np.asarray(actions) == 0)
    return int(drops[-1]) + 1 if drops.size else 0


def solve_average_cost(
    inst: ProblemInstance, tol: float = 1e-10, max_iters: int = 1_000_000, damping: float = 0.5
) -> SolveResult:
    """Relative value iteration with reference state ``s = 1``.

    Each sweep mixes the Bellman update with the previous iterate
    (``V <- (1 - damping) V + damping T V``), which leaves the fixed point and
    the optimal policy unchanged but removes the near-periodicity of threshold
    chains that otherwise stalls plain iteration. Stops when the span of
    ``T V - V`` drops below ``tol``; ``rho_star`` is the midpoint of that
    difference, so the Bellman residual is at most ``tol / 2``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    cost = inst.cost_table
    v = np.zeros(inst.num_states)
    span = np.inf
    for it in range(1, max_iters + 1):
        tv = (cost + expected_next_values(inst, v)).min(axis=1)
        diff = tv - v
        span = diff.max() - diff.min()
        if span < tol:
            break
        w = (1.0 - damping) * v + damping * tv
        v = w - w[0]
    else:
        raise NonConvergenceError(
            f"relative value iteration: span {span:.3e} >= tol {tol:.1e} after {max_iters} sweeps"
        )
    rho = 0.5 * (diff.max() + diff.min())
    q = cost + expected_next_values(inst, v)
    actions = greedy_actions(q)
    residual = float(np.max(np.abs(rho + v - q.min(axis=1))))
    return SolveResult(
        rho_star=float(rho),
        value_fn=v,
        q_table=q,
        policy=PolicyTable(actions),
        threshold=extract_threshold(actions),
        best_channel=inst.best_channel,
        iterations=it,
        bellman_residual=residual,
    )


def solve_finite_horizon(inst: ProblemInstance, horizon: Optional[int] = None) -> FiniteHorizonSolution:
    H = inst.horizon if horizon is None else horizon
    values = np.zeros((H + 1, inst.num_states))
    actions = np.zeros((H, inst.num_states), dtype=int)
    cost = inst.cost_table
    for h in range(H - 1, -1, -1):
        q = cost + expected_next_values(inst, values[h + 1])
        actions[h] = greedy_actions(q)
        values[h] = q[np.arange(inst.num_states), actions[h]]
    return FiniteHorizonSolution(PolicyTable(actions), values)


# -- Markov chain of a stationary policy --------------------------------------


def policy_transition_matrix(inst: ProblemInstance, actions) -> np.ndarray:
    actions = np.asarray(actions)
    S = inst.num_states
    P = np.zeros((S, S))
    for i, a in enumerate(actions):
        nxt = inst.next_if_fail[i]
        if a == 0:
            P[i, nxt] = 1.0
        else:
            mu = inst.success_probs[a - 1]
            P[i, 0] += mu
            P[i, nxt] += 1.0 - mu
    return P


def policy_stationary_distribution(inst: ProblemInstance, actions) -> np.ndarray:
    """Solve ``gamma^T P = gamma^T``, ``sum(gamma) = 1`` directly (least squares on the stacked system)."""
    P = policy_transition_matrix(inst, actions)
    S = inst.num_states
    lhs = np.vstack([P.T - np.eye(S), np.ones((1, S))])
    rhs = np.zeros(S + 1)
    rhs[-1] = 1.0
    gamma, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    return gamma


def evaluate_policy(inst: ProblemInstance, actions) -> tuple[float, np.ndarray]:
    """Average cost and relative values (``V(1) = 0``) of a unichain stationary policy."""
    actions = np.asarray(actions)
    P = policy_transition_matrix(inst, actions)
    c = inst.cost_table[np.arange(inst.num_states), actions]
    S = inst.num_states
    # unknowns: rho, V(2..S)
    lhs = np.zeros((S, S))
    lhs[:, 0] = 1.0
    lhs[:, 1:] = np.eye(S)[:, 1:] - P[:, 1:]
    sol = np.linalg.solve(lhs, c)
    v = np.concatenate([[0.0], sol[1:]])
    return float(sol[0]), v


def threshold_actions(inst: ProblemInstance, a_th: int) -> np.ndarray:
    states = np.arange(1, inst.num_states + 1)
    return np.where(states <= a_th, 0, inst.best_channel)


def stationary_average_cost(inst: ProblemInstance, a_th: int) -> tuple[float, StationaryDistribution]:
    """Average cost of the threshold policy "drop iff s <= a_th, else use the best channel".

    Uses the closed recurrences of the induced chain: flat mass below the
    threshold, geometric decay above it, and the saturated state collecting
    the tail. Accepts ``0 <= a_th <= a_max`` (``a_max`` drops everywhere and the
    chain is absorbed at ``a_max``).
    """
    S = inst.num_states
    if not 0 <= a_th <= S:
        raise ValueError(f"a_th={a_th} outside 0..{S}")
    states = np.arange(1, S + 1)
    gamma = np.zeros(S)
    if a_th == S:
        gamma[-1] = 1.0
    else:
        mu = inst.success_probs[inst.best_channel - 1]
        q = 1.0 - mu
        base = 1.0 / (a_th + 1.0 / mu)
        gamma[:a_th] = base
        tail = np.arange(S - a_th - 1)
        gamma[a_th:S - 1] = base * q ** tail
        gamma[-1] = base * q ** (S - a_th - 1) / mu
    cost = inst.alpha * inst.age_fn(states) + (1 - inst.alpha) * inst.power_cost * (states > a_th)
    return float(cost @ gamma), StationaryDistribution(gamma)


def closed_form_rho(inst: ProblemInstance, a_th: int) -> float:
    if not inst.age_fn.is_linear:
        raise ValueError("closed-form average cost needs a linear age function")
    if not 1 <= a_th < inst.a_max:
        raise ValueError(f"a_th={a_th} outside 1..{inst.a_max - 1}")
    alpha, P = inst.alpha, inst.power_cost
    mu = inst.success_probs[inst.best_channel - 1]
    q = 1.0 - mu
    beta = inst.a_max - (a_th + 1)
    b1 = alpha * a_th * (a_th + 1) / 2
    b2 = (alpha * (a_th + 1) + (1 - alpha) * P + alpha * beta * q**beta) / mu
    # sum_{i<beta} i q^i in closed form
    b3 = alpha * q / mu**2 * (q ** (beta - 1) * ((beta - 1) * q - beta) + 1) if beta > 0 else 0.0
    return (b1 + b2 + b3) / (a_th + 1 / mu)


def power_thresholds(inst: ProblemInstance) -> tuple[float, float]:
    """Power costs below which transmitting everywhere, and above which dropping everywhere, is optimal.

    Both come from ``mu_best * (V(s') - V(1)) / (1 - alpha)`` with ``V`` the
    relative value function of the extreme policy itself (transmit-all for
    ``p_min`` at ``s' = 2``, drop-all for ``p_max`` at ``s' = a_max``); those
    value functions do not depend on ``P``, so the bounds are exact.
    """
    if inst.alpha == 1:
        raise ZeroDivisionError("power thresholds are undefined for alpha = 1")
    k = inst.best_channel
    mu = inst.success_probs[k - 1]
    states = np.arange(1, inst.num_states + 1)
    _, v_all = evaluate_policy(inst, np.full(inst.num_states, k))
    # drop-all: V(s+1) - V(s) = alpha * (F(a_max) - F(s)), absorbing at a_max
    ages = inst.age_fn(states)
    v_drop_top = inst.alpha * float(np.sum(ages[-1] - ages[:-1]))
    p_min = mu * (v_all[1] - v_all[0]) / (1 - inst.alpha)
    p_max = mu * v_drop_top / (1 - inst.alpha)
    return float(p_min), float(p_max)


# -- structure checks ----------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    violation: Optional[int] = None  # first offending state
    detail: str = ""


@dataclass
class StructureReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def verify_structure(solve: SolveResult, atol: float = 1e-10) -> StructureReport:
    v = np.asarray(solve.value_fn)
    actions = np.asarray(solve.policy.actions)
    k = solve.best_channel

    drops = np.flatnonzero(v[:-1] > v[1:] + atol)
    mono = CheckResult("monotone_value", drops.size == 0, int(drops[0]) + 1 if drops.size else None)

    off = np.flatnonzero((actions != 0) & (actions != k))
    chan = CheckResult("best_channel_only", off.size == 0, int(off[0]) + 1 if off.size else None)

    violation = None
    seen_transmit = False
    for i, a in enumerate(actions):
        if a != 0:
            seen_transmit = True
        elif seen_transmit:
            violation = i + 1
            break
    thresh = CheckResult("threshold_form", violation is None, violation)
    return StructureReport([mono, chan, thresh])


def solution_table(inst: ProblemInstance, solve: SolveResult) -> str:
    header = ["s", "V"] + [f"Q{a}" for a in range(inst.num_actions)] + ["policy"]
    rows = ["\t".join(header)]
    for i in range(inst.num_states):
        cells = [str(i + 1), f"{solve.value_fn[i]:.17g}"]
        cells += [f"{x:.17g}" for x in solve.q_table[i]]
        cells.append(str(int(solve.policy.actions[i])))
        rows.append("\t".join(cells))
    return "\n".join(rows) + "\n"
