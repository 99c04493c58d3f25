"""AoI/energy scheduling environment.

States are AoI values ``s`` in ``1..a_max``; actions are ``0`` (drop the fresh
update) or ``i`` in ``1..C`` (transmit over channel ``i``). Arrays indexed by
state use position ``s - 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace as _replace
from functools import cached_property
from typing import Optional

import numpy as np


class ConfigError(ValueError):
    """Invalid instance or experiment parameter. ``key`` names the offender."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class AgeFunction:
    """Non-decreasing age cost ``F``: ``linear`` (F(s) = s) or ``exponential`` (F(s) = exp(rate * s))."""

    kind: str = "linear"
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "exponential"):
            raise ConfigError("age_fn", f"unknown age function {self.kind!r}")
        if self.kind == "exponential" and not self.rate > 0:
            raise ConfigError("age_rate", "exponential age function needs rate > 0")

    @classmethod
    def linear(cls) -> "AgeFunction":
        return cls("linear", 0.0)

    @classmethod
    def exponential(cls, rate: float) -> "AgeFunction":
        return cls("exponential", float(rate))

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear"

    def __call__(self, s):
        if self.kind == "linear":
            return np.asarray(s, dtype=float) if np.ndim(s) else float(s)
        return np.exp(self.rate * np.asarray(s, dtype=float)) if np.ndim(s) else math.exp(self.rate * s)


@dataclass(frozen=True)
class ProblemInstance:
    num_channels: int
    success_probs: tuple
    a_max: int
    power_cost: float
    alpha: float
    age_fn: AgeFunction = field(default_factory=AgeFunction.linear)
    horizon: int = 1
    num_episodes: int = 1
    delta: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "success_probs", tuple(float(m) for m in self.success_probs))
        if int(self.num_channels) != self.num_channels or self.num_channels < 1:
            raise ConfigError("num_channels", "must be a positive integer")
        if len(self.success_probs) != self.num_channels:
            raise ConfigError(
                "success_probs",
                f"expected {self.num_channels} values, got {len(self.success_probs)}",
            )
        for mu in self.success_probs:
            if not 0.0 < mu < 1.0:
                raise ConfigError("success_probs", f"{mu!r} is not inside (0, 1)")
        if int(self.a_max) != self.a_max or self.a_max < 2:
            raise ConfigError("a_max", "must be an integer >= 2")
        if not (self.power_cost >= 0 and math.isfinite(self.power_cost)):
            raise ConfigError("power_cost", "must be a finite nonnegative number")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha", "must lie in [0, 1]")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigError("horizon", "must be a positive integer")
        if int(self.num_episodes) != self.num_episodes or self.num_episodes < 1:
            raise ConfigError("num_episodes", "must be a positive integer")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError("delta", "must lie in (0, 1)")
        ages = self.age_fn(np.arange(1, self.a_max + 1))
        if not np.all(np.isfinite(ages)):
            raise ConfigError("age_rate", "age cost overflows on 1..a_max")
        if self.reward_scale <= 0:
            raise ConfigError("alpha", "cost range is empty; normalized reward undefined")

    # -- derived quantities -------------------------------------------------

    @property
    def num_states(self) -> int:
        return self.a_max

    @property
    def num_actions(self) -> int:
        return self.num_channels + 1

    @property
    def total_steps(self) -> int:
        return self.num_episodes * self.horizon

    @property
    def best_channel(self) -> int:
        """1-based index of the most reliable channel, lowest index on ties."""
        return int(np.argmax(self.success_probs)) + 1

    @property
    def mu_array(self) -> np.ndarray:
        return np.asarray(self.success_probs, dtype=float)

    @property
    def max_cost(self) -> float:
        return self.alpha * self.age_fn(self.a_max) + (1 - self.alpha) * self.power_cost

    @property
    def reward_scale(self) -> float:
        return (
            self.alpha * (self.age_fn(self.a_max) - self.age_fn(1))
            + (1 - self.alpha) * self.power_cost
        )

    @cached_property
    def next_if_fail(self) -> np.ndarray:
        """``s+ = min(a_max, s + 1)`` as 0-based indices, one per state."""
        out = np.minimum(np.arange(1, self.a_max + 1), self.a_max - 1)
        out.setflags(write=False)
        return out

    @cached_property
    def cost_table(self) -> np.ndarray:
        """``cost[s-1, a]`` for every state/action pair."""
        ages = self.alpha * self.age_fn(np.arange(1, self.a_max + 1))
        table = np.repeat(ages[:, None], self.num_actions, axis=1)
        table[:, 1:] += (1 - self.alpha) * self.power_cost
        table.setflags(write=False)
        return table

    @cached_property
    def reward_table(self) -> np.ndarray:
        table = (self.max_cost - self.cost_table) / self.reward_scale
        # clip rounding spill outside [0, 1]
        table = np.clip(table, 0.0, 1.0)
        table.setflags(write=False)
        return table

    def replace(self, **changes) -> "ProblemInstance":
        return _replace(self, **changes)

    def check_state(self, s: int) -> None:
        if not 1 <= s <= self.a_max:
            raise ValueError(f"state {s} outside 1..{self.a_max}")

    def check_action(self, a: int) -> None:
        if not 0 <= a <= self.num_channels:
            raise ValueError(f"action {a} outside 0..{self.num_channels}")


@dataclass(frozen=True)
class StepOutcome:
    next_state: int
    cost: float
    transmission_success: Optional[bool] = None


def equally_spaced_probs(lo: float, hi: float, n: int) -> tuple:
    if n == 1:
        return (float(hi),)
    return tuple(float(x) for x in np.linspace(lo, hi, n))


def step_cost(inst: ProblemInstance, s: int, a: int) -> float:
    return inst.alpha * inst.age_fn(s) + (1 - inst.alpha) * inst.power_cost * (a != 0)


def transition_dist(inst: ProblemInstance, s: int, a: int) -> np.ndarray:
    """Next-state distribution as a length-``a_max`` vector (entry ``s'-1``)."""
    inst.check_state(s)
    inst.check_action(a)
    dist = np.zeros(inst.a_max)
    s_next = min(inst.a_max, s + 1)
    if a == 0:
        dist[s_next - 1] = 1.0
    else:
        mu = inst.success_probs[a - 1]
        dist[0] += mu
        dist[s_next - 1] += 1.0 - mu
    return dist


def transition_tensor(inst: ProblemInstance, success_probs=None) -> np.ndarray:
    """Full kernel ``P[s-1, a, s'-1]``; ``success_probs`` overrides the true channel reliabilities."""
    mu = inst.mu_array if success_probs is None else np.asarray(success_probs, dtype=float)
    S, A = inst.num_states, inst.num_actions
    P = np.zeros((S, A, S))
    rows = np.arange(S)
    P[rows, 0, inst.next_if_fail] = 1.0
    for a in range(1, A):
        P[rows, a, 0] += mu[a - 1]
        P[rows, a, inst.next_if_fail] += 1.0 - mu[a - 1]
    return P


def sample_step(inst: ProblemInstance, s: int, a: int, rng: np.random.Generator) -> StepOutcome:
    inst.check_state(s)
    inst.check_action(a)
    cost = step_cost(inst, s, a)
    s_next = min(inst.a_max, s + 1)
    if a == 0:
        return StepOutcome(s_next, cost)
    success = bool(rng.random() < inst.success_probs[a - 1])
    return StepOutcome(1 if success else s_next, cost, success)


def sample_pilot(inst: ProblemInstance, channel: int, rng: np.random.Generator) -> bool:
    """Probe ``channel`` with a zero-cost pilot. The AoI state is untouched."""
    if not 1 <= channel <= inst.num_channels:
        raise ValueError(f"pilot channel {channel} outside 1..{inst.num_channels}")
    return bool(rng.random() < inst.success_probs[channel - 1])


def normalized_reward(inst: ProblemInstance, s: int, a: int) -> float:
    return (inst.max_cost - step_cost(inst, s, a)) / inst.reward_scale


def reward_to_cost(inst: ProblemInstance, r):
    return inst.max_cost - r * inst.reward_scale
