#!/usr/bin/env python3
"""Reproduce the simulated-demonstrator comparison on one task: train every
method over several seeds (in parallel worker processes), print a summary
table, and emit the learning-curve plot.

    python scripts/run_oracle_experiments.py --task nav1 --seeds 7 8 9 \
        --methods early passive uniform bc sac --out runs/nav1
"""

import argparse
import statistics
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from early import harness
from early.config import ExperimentConfig
from early.evaluation import convergence_steps
from early.runio import load_run


def run_one(args):
    task, method, seed, out_dir = args
    cfg = ExperimentConfig(task=task, method=method, seed=seed)
    return harness.run_experiment(cfg, out_dir)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--task", default="nav1")
    parser.add_argument("--methods", nargs="+",
                        default=["early", "passive", "uniform", "bc", "sac"])
    parser.add_argument("--seeds", nargs="+", type=int, default=[7, 8, 9])
    parser.add_argument("--out", default="runs/oracle")
    parser.add_argument("--workers", type=int, default=4)
    args = parser.parse_args()

    root = Path(args.out)
    jobs = []
    run_dirs = {}
    for method in args.methods:
        for seed in args.seeds:
            out_dir = root / f"{args.task}-{method}-s{seed}"
            run_dirs.setdefault(method, []).append(out_dir)
            if not (out_dir / "summary.json").exists():
                jobs.append((args.task, method, seed, str(out_dir)))

    if jobs:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            list(pool.map(run_one, jobs))

    print(f"\n{args.task}: median over seeds {args.seeds}")
    print(f"{'method':>10} {'final':>7} {'converged@':>11}")
    for method in args.methods:
        finals, convs = [], []
        for d in run_dirs[method]:
            rows = load_run(d)["metrics"]
            curve = [(r["env_step"], r["eval_success_rate"]) for r in rows]
            finals.append(curve[-1][1])
            conv = convergence_steps(curve, harness.CONVERGENCE_THRESHOLD,
                                     harness.CONVERGENCE_PATIENCE)
            convs.append(conv if conv is not None else float("inf"))
        conv_med = statistics.median(convs)
        conv_str = f"{conv_med:.0f}" if conv_med != float("inf") else "never"
        print(f"{method:>10} {statistics.median(finals):>7.3f} {conv_str:>11}")

    plot = harness.emit_plot([d for dirs in run_dirs.values() for d in dirs],
                             root / "curves.svg")
    print(f"\nwrote {plot}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
