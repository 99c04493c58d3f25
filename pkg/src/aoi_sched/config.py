"""Flat ``key = value`` configuration files.

One key per line, ``#`` starts a comment, arrays are comma separated::

    num_channels = 4
    success_probs = 0.2,0.4,0.6,0.8
    a_max = 10

``success_range = lo,hi`` may replace ``success_probs``; it expands to
``num_channels`` equally spaced reliabilities, which keeps presets valid when
``num_channels`` is overridden on the command line.
"""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping

from .harness import ExperimentConfig
from .learn import Algorithm, InitialStateMode
from .model import AgeFunction, ConfigError, ProblemInstance, equally_spaced_probs

INSTANCE_KEYS = (
    "num_channels", "success_probs", "success_range", "a_max", "power_cost", "alpha",
    "age_fn", "age_rate", "horizon", "num_episodes", "delta",
)
EXPERIMENT_KEYS = (
    "algorithm", "initial_state_mode", "replications", "base_seed", "record_trace",
    "theta0_constant", "regret_estimator",
)
KNOWN_KEYS = frozenset(INSTANCE_KEYS + EXPERIMENT_KEYS)


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(key, "unknown configuration key")
        values[key] = value
    return values


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from exc
    return parse_config_text(text)


def apply_overrides(values: Mapping[str, str], overrides: Iterable[str]) -> dict:
    out = dict(values)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(key, "unknown configuration key")
        out[key] = value
        if key == "success_probs":
            out.pop("success_range", None)
        elif key == "success_range":
            out.pop("success_probs", None)
    return out


def _number(values, key, kind, default=None):
    if key not in values:
        if default is None:
            raise ConfigError(key, "missing required key")
        return default
    try:
        if kind is int:
            as_float = float(values[key])
            if as_float != int(as_float):
                raise ValueError
            return int(as_float)
        return kind(values[key])
    except ValueError:
        raise ConfigError(key, f"cannot parse {values[key]!r} as {kind.__name__}") from None


def _floats(values, key):
    try:
        return tuple(float(x) for x in values[key].split(",") if x.strip())
    except ValueError:
        raise ConfigError(key, f"cannot parse {values[key]!r} as a list of numbers") from None


def instance_from_values(values: Mapping[str, str]) -> ProblemInstance:
    num_channels = _number(values, "num_channels", int)
    if "success_probs" in values:
        probs = _floats(values, "success_probs")
    elif "success_range" in values:
        bounds = _floats(values, "success_range")
        if len(bounds) != 2:
            raise ConfigError("success_range", "expected two values lo,hi")
        probs = equally_spaced_probs(bounds[0], bounds[1], num_channels)
    else:
        raise ConfigError("success_probs", "missing required key")
    kind = values.get("age_fn", "linear").strip().lower()
    if kind == "linear":
        age_fn = AgeFunction.linear()
    else:
        age_fn = AgeFunction(kind, _number(values, "age_rate", float, 0.0))
    return ProblemInstance(
        num_channels=num_channels,
        success_probs=probs,
        a_max=_number(values, "a_max", int),
        power_cost=_number(values, "power_cost", float),
        alpha=_number(values, "alpha", float),
        age_fn=age_fn,
        horizon=_number(values, "horizon", int, 1),
        num_episodes=_number(values, "num_episodes", int, 1),
        delta=_number(values, "delta", float, 0.1),
    )


def instance_to_text(inst: ProblemInstance) -> str:
    lines = [
        f"num_channels = {inst.num_channels}",
        "success_probs = " + ",".join(repr(m) for m in inst.success_probs),
        f"a_max = {inst.a_max}",
        f"power_cost = {inst.power_cost!r}",
        f"alpha = {inst.alpha!r}",
        f"age_fn = {inst.age_fn.kind}",
    ]
    if not inst.age_fn.is_linear:
        lines.append(f"age_rate = {inst.age_fn.rate!r}")
    lines += [
        f"horizon = {inst.horizon}",
        f"num_episodes = {inst.num_episodes}",
        f"delta = {inst.delta!r}",
    ]
    return "\n".join(lines) + "\n"


def load_instance(path, overrides: Iterable[str] = ()) -> ProblemInstance:
    return instance_from_values(apply_overrides(load_config(path), overrides))


def _flag(values, key, default):
    if key not in values:
        return default
    text = values[key].strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"cannot parse {values[key]!r} as a boolean")


def _choice(values, key, enum_cls, default):
    text = values.get(key, default).strip().lower()
    try:
        return enum_cls(text)
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise ConfigError(key, f"{text!r} is not one of {allowed}") from None


def experiment_from_values(values: Mapping[str, str]) -> ExperimentConfig:
    return ExperimentConfig(
        instance=instance_from_values(values),
        algorithm=_choice(values, "algorithm", Algorithm, "alg1"),
        initial_state_mode=_choice(values, "initial_state_mode", InitialStateMode, "uniform"),
        replications=_number(values, "replications", int, 20),
        base_seed=_number(values, "base_seed", int, 0),
        record_trace=_flag(values, "record_trace", False),
        theta0_constant=_number(values, "theta0_constant", float, 1.0),
        regret_estimator=values.get("regret_estimator", "expected").strip().lower(),
    )


def load_experiment(path, overrides: Iterable[str] = ()) -> ExperimentConfig:
    return experiment_from_values(apply_overrides(load_config(path), overrides))
