"""Command-line front end: ``aoi-sched {solve,simulate,verify,sweep}``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .checks import random_instance, verify_instance
from .config import apply_overrides, experiment_from_values, instance_from_values, load_config
from .exact import (
    NonConvergenceError,
    closed_form_rho,
    solution_table,
    solve_average_cost,
    stationary_average_cost,
    power_thresholds,
)
from .harness import emit_csv, emit_trace_csv, run_experiment
from .model import ConfigError


def _values(args) -> dict:
    values = apply_overrides(load_config(args.config), args.set or [])
    if getattr(args, "seed", None) is not None:
        values["base_seed"] = str(args.seed)
    return values


def _write(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    inst = instance_from_values(_values(args))
    solve = solve_average_cost(inst)
    a_th = solve.threshold
    lines = [
        f"rho_star_via = {solve.rho_star:.17g}",
        f"rho_star_chain = {stationary_average_cost(inst, a_th)[0]:.17g}",
    ]
    if inst.age_fn.is_linear and 1 <= a_th < inst.a_max:
        lines.append(f"rho_star_closed_form = {closed_form_rho(inst, a_th):.17g}")
    else:
        lines.append("rho_star_closed_form = n/a")
    lines += [f"threshold = {a_th}", f"best_channel = {solve.best_channel}"]
    if inst.alpha < 1:
        p_min, p_max = power_thresholds(inst)
        lines += [f"p_min = {p_min:.17g}", f"p_max = {p_max:.17g}"]
    lines += [f"iterations = {solve.iterations}", ""]
    report = "\n".join(lines) + "\n" + solution_table(inst, solve)
    _write(report, args.out)
    if args.out:
        print("\n".join(lines[: lines.index("")]))
    return 0


def _run_and_write(cfg, out: Optional[str]) -> None:
    trace = run_experiment(cfg)
    if cfg.algorithm.value == "alg1":
        print(f"theta0 = {trace.theta0}")
    if out:
        emit_csv(trace, out)
        if cfg.record_trace:
            emit_trace_csv(trace, Path(out).with_suffix(".trace.csv"))
    K = trace.num_episodes
    print(
        f"{cfg.algorithm.value}: K={K} R={cfg.replications} "
        f"final mean cumulative regret {trace.mean_cum_regret[-1]:.17g} "
        f"(stderr {trace.stderr[-1]:.17g})"
    )


def cmd_simulate(args) -> int:
    cfg = experiment_from_values(_values(args))
    _run_and_write(cfg, args.out)
    return 0


def cmd_sweep(args) -> int:
    base = _values(args)
    out = Path(args.out) if args.out else None
    for value in args.values.split(","):
        value = value.strip()
        cfg = experiment_from_values(apply_overrides(base, [f"{args.param}={value}"]))
        target = None
        if out is not None:
            target = out.with_name(f"{out.stem}_{args.param}={value}{out.suffix or '.csv'}")
        print(f"[{args.param} = {value}]")
        _run_and_write(cfg, str(target) if target else None)
    return 0


def cmd_verify(args, value_override=None) -> int:
    if args.sweep:
        rng = np.random.default_rng(args.seed if args.seed is not None else 0)
        instances = [random_instance(rng) for _ in range(args.sweep)]
    else:
        instances = [instance_from_values(_values(args))]
    lines = []
    failures = 0
    for i, inst in enumerate(instances):
        for check in verify_instance(inst, value_override=value_override):
            status = "PASS" if check.passed else "FAIL"
            where = f" at s={check.violation}" if check.violation is not None else ""
            lines.append(f"[{i}] {status} {check.name}{where} {check.detail}".rstrip())
            failures += not check.passed
    lines.append(f"{failures} failed check(s) over {len(instances)} instance(s)")
    _write("\n".join(lines) + "\n", args.out)
    if args.out:
        print(lines[-1])
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoi-sched", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="key = value config file")
        p.add_argument("--out", help="output path (stdout if omitted)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--seed", type=int, help="base seed (simulate/sweep) or sweep seed (verify)")

    common(sub.add_parser("solve", help="solve the known-statistics average-cost problem"))
    common(sub.add_parser("simulate", help="run a regret experiment and write the CSV"))
    p = sub.add_parser("verify", help="structural and oracle checks")
    common(p, config_required=False)
    p.add_argument("--sweep", type=int, default=0, metavar="N", help="check N random instances instead")
    p = sub.add_parser("sweep", help="run simulate for several values of one key")
    common(p)
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    return parser


COMMANDS = {"solve": cmd_solve, "simulate": cmd_simulate, "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify" and not args.sweep and not args.config:
        print("error: verify needs --config or --sweep N", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: invalid configuration, {exc}", file=sys.stderr)
        return 2
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
