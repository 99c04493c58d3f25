#!/usr/bin/env python3
"""Write the regret curves behind each figure preset as CSV files.

    python3 scripts/reproduce_figures.py --out results
    python3 scripts/reproduce_figures.py --figures fig2a fig4 --episodes 500 --replications 5

Each run writes ``<out>/<figure>_<label>.csv`` in the harness CSV format and
prints the final mean cumulative regret. Nothing is plotted.
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

from aoi_sched.config import load_experiment
from aoi_sched.harness import emit_csv, run_experiment

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# figure -> list of (label, overrides)
RUNS = {
    "fig2a": [("alg1", []), ("ucbvi", ["algorithm=ucbvi"])],
    "fig2b": [("alg1", []), ("ucbvi", ["algorithm=ucbvi"])],
    "fig2c": [("alg1", []), ("ucbvi", ["algorithm=ucbvi"])],
    "fig3": [(f"alpha={a}", [f"alpha={a}"]) for a in (0.2, 0.4, 0.6, 0.8)],
    "fig4": [(f"C={c}", [f"num_channels={c}"]) for c in (5, 10)],
    "fig5": [(f"psi={r}", [f"age_rate={r}"]) for r in (0.1, 0.2, 0.3)],
    "fig6": [(f"C={c}", [f"num_channels={c}"]) for c in (5, 10, 15)],
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--figures", nargs="+", default=list(RUNS), choices=list(RUNS))
    parser.add_argument("--out", default="results")
    parser.add_argument("--episodes", type=int, help="override K")
    parser.add_argument("--replications", type=int, help="override R")
    parser.add_argument("--seed", type=int, help="override base_seed")
    args = parser.parse_args(argv)

    common = []
    if args.episodes:
        common.append(f"num_episodes={args.episodes}")
    if args.replications:
        common.append(f"replications={args.replications}")
    if args.seed is not None:
        common.append(f"base_seed={args.seed}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for fig in args.figures:
        for label, overrides in RUNS[fig]:
            cfg = load_experiment(CONFIGS / f"{fig}.conf", overrides + common)
            start = time.perf_counter()
            trace = run_experiment(cfg)
            path = emit_csv(trace, out / f"{fig}_{label}.csv")
            print(f"{fig} {label}: regret at K={trace.num_episodes} "
                  f"{trace.mean_cum_regret[-1]:.2f} +- {trace.stderr[-1]:.2f} "
                  f"({time.perf_counter() - start:.0f} s) -> {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
