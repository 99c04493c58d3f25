"""Oracle and structure checks on solved instances, plus random instance generation."""
from __future__ import annotations

from dataclasses import replace
from typing import Optional

import numpy as np

from .exact import (
    CheckResult,
    NonConvergenceError,
    closed_form_rho,
    policy_stationary_distribution,
    power_thresholds,
    solve_average_cost,
    stationary_average_cost,
    threshold_actions,
    verify_structure,
)
from .model import AgeFunction, ProblemInstance

RHO_RTOL = 1e-6
CLOSED_FORM_RTOL = 1e-9
GAMMA_ATOL = 1e-10


def random_instance(rng: np.random.Generator, a_max_range=(5, 50), channels_range=(1, 8),
                    mu_range=(0.05, 0.95), age_fn: Optional[AgeFunction] = None) -> ProblemInstance:
    """Random instance with ``P`` drawn uniformly below twice the drop-everywhere power bound."""
    a_max = int(rng.integers(a_max_range[0], a_max_range[1] + 1))
    C = int(rng.integers(channels_range[0], channels_range[1] + 1))
    mus = rng.uniform(*mu_range, size=C)
    alpha = float(rng.uniform(0.0, 1.0))
    while alpha == 0.0:
        alpha = float(rng.uniform(0.0, 1.0))
    inst = ProblemInstance(C, tuple(mus), a_max, 1.0, alpha, age_fn or AgeFunction.linear())
    _, p_max = power_thresholds(inst)
    power = float(rng.uniform(0.0, 2.0 * p_max))
    while power == 0.0:
        power = float(rng.uniform(0.0, 2.0 * p_max))
    return replace(inst, power_cost=power)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def verify_instance(inst: ProblemInstance, tol: float = 1e-10,
                    value_override: Optional[np.ndarray] = None) -> list[CheckResult]:
    """Run every structural and oracle check on ``inst``.

    ``value_override`` replaces the solver's value function before the
    structure checks (negative-control hook).
    """
    results = []
    try:
        solve = solve_average_cost(inst, tol=tol)
    except NonConvergenceError as exc:
        return [CheckResult("convergence", False, detail=str(exc))]
    results.append(CheckResult("convergence", True, detail=f"{solve.iterations} sweeps"))
    results.append(CheckResult(
        "bellman_residual", solve.bellman_residual < tol, detail=f"{solve.bellman_residual:.3e}"))

    if value_override is not None:
        solve = replace(solve, value_fn=np.asarray(value_override, dtype=float))
    results.extend(verify_structure(solve).checks)

    a_th = solve.threshold
    rho_sd, dist = stationary_average_cost(inst, a_th)
    err = _rel(solve.rho_star, rho_sd)
    results.append(CheckResult(
        "rho_vs_stationary", err <= RHO_RTOL,
        detail=f"VIA {solve.rho_star:.17g} vs chain {rho_sd:.17g} (rel {err:.2e})"))

    gamma_direct = policy_stationary_distribution(inst, threshold_actions(inst, a_th))
    gap = float(np.max(np.abs(dist.gamma - gamma_direct)))
    results.append(CheckResult("gamma_vs_linear_solve", gap <= GAMMA_ATOL, detail=f"max gap {gap:.2e}"))

    if inst.age_fn.is_linear and 1 <= a_th < inst.a_max:
        rho_cf = closed_form_rho(inst, a_th)
        err = _rel(rho_cf, rho_sd)
        results.append(CheckResult(
            "closed_form_vs_stationary", err <= CLOSED_FORM_RTOL, detail=f"rel {err:.2e}"))

    if inst.alpha < 1:
        p_min, p_max = power_thresholds(inst)
        k = inst.best_channel
        low = solve_average_cost(replace(inst, power_cost=0.5 * p_min), tol=tol)
        results.append(CheckResult(
            "transmit_below_p_min", bool(np.all(low.policy.actions == k)),
            detail=f"P_min {p_min:.17g}"))
        high = solve_average_cost(replace(inst, power_cost=2.0 * p_max), tol=tol)
        results.append(CheckResult(
            "drop_above_p_max", bool(np.all(high.policy.actions == 0)),
            detail=f"P_max {p_max:.17g}"))
    return results
