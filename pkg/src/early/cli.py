"""Command-line surface: train, eval, plot, collect-demos, serve."""

from __future__ import annotations

import argparse
import os
import sys

from . import baselines, envsim, harness
from .config import (METHODS, ExperimentConfig, config_from_dict,
                     load_config_file, merge_config)
from .evaluation import evaluate, seed_stream
from .runio import save_trajectory
from .sac import load_agent


def _add_common_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--task", default=None, help="nav1|nav2|nav3 or a map file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON config file; CLI flags override it")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--steps", type=int, default=None, help="environment step budget")
    p.add_argument("--eval-every", type=int, default=None)
    p.add_argument("--eval-episodes", type=int, default=None)
    p.add_argument("--n-demos", type=int, default=None, help="demonstration budget N_d")
    p.add_argument("--r-query", type=float, default=None)
    p.add_argument("--port", type=int, default=None, help="teleoperation port")


def _build_config(args, forced: dict | None = None) -> ExperimentConfig:
    doc: dict = {}
    if args.config:
        doc = load_config_file(args.config)
    flag_map = {
        "task": args.task,
        "seed": args.seed,
        "env_step_budget": args.steps,
        "eval_every": getattr(args, "eval_every", None),
        "eval_episodes": getattr(args, "eval_episodes", None),
        "n_d": getattr(args, "n_demos", None),
        "r_query": getattr(args, "r_query", None),
        "port": getattr(args, "port", None),
        "method": getattr(args, "method", None),
        "demo_source": getattr(args, "demo_source", None),
    }
    overrides = {k: v for k, v in flag_map.items() if v is not None}
    if forced:
        overrides.update(forced)
    return config_from_dict(merge_config(doc, overrides)).validate()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="early",
        description="Active querying of episodic expert demonstrations: "
                    "training runs, baselines, evaluation, and plots.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training experiment")
    p_train.add_argument("--method", choices=METHODS, default=None)
    p_train.add_argument("--demo-source", choices=("oracle", "human"), default=None)
    _add_common_train_flags(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a saved agent checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--task", required=True)
    p_eval.add_argument("--episodes", type=int, default=100)
    p_eval.add_argument("--seed", type=int, default=0)

    p_plot = sub.add_parser("plot", help="learning-curve chart from run dirs")
    p_plot.add_argument("--runs", nargs="+", required=True)
    p_plot.add_argument("--out", required=True)

    p_collect = sub.add_parser("collect-demos",
                               help="save uniformly-queried oracle demos")
    p_collect.add_argument("--task", default="nav1")
    p_collect.add_argument("--n", type=int, default=60)
    p_collect.add_argument("--seed", type=int, default=0)
    p_collect.add_argument("--out", required=True, help="output directory")

    p_serve = sub.add_parser(
        "serve", help="train with a live human demonstrator over websocket")
    p_serve.add_argument("--demo-source", choices=("human",), default="human",
                         help=argparse.SUPPRESS)
    _add_common_train_flags(p_serve)
    return parser


def _cmd_train(args) -> int:
    cfg = _build_config(args)
    harness.run_experiment(cfg, args.out)
    return 0


def _cmd_serve(args) -> int:
    cfg = _build_config(args, forced={"method": "early", "demo_source": "human"})
    harness.run_experiment(cfg, args.out)
    return 0


def _cmd_eval(args) -> int:
    agent = load_agent(args.checkpoint)
    map_spec = harness.load_task_map(args.task)
    rate = evaluate(agent, map_spec, args.episodes,
                    seed_stream(args.seed, "eval", "cli"))
    print(f"success rate over {args.episodes} episodes: {rate:.3f}")
    return 0


def _cmd_plot(args) -> int:
    out = harness.emit_plot(args.runs, args.out)
    print(f"wrote {out}")
    return 0


def _cmd_collect(args) -> int:
    cfg = ExperimentConfig(task=args.task, method="passive", seed=args.seed,
                           n_d=args.n).validate()
    map_spec = harness.load_task_map(cfg.task)
    source = harness.make_oracle_source(cfg, map_spec)
    demos = baselines.collect_uniform_demos(
        map_spec, source, args.n, seed_stream(args.seed, "demo-collect"))
    os.makedirs(args.out, exist_ok=True)
    for i, demo in enumerate(demos):
        save_trajectory(os.path.join(args.out, f"demo_{i:03d}.jsonl"),
                        demo, map_spec.name, seed=args.seed)
    print(f"wrote {len(demos)} demos to {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "train": _cmd_train,
        "serve": _cmd_serve,
        "eval": _cmd_eval,
        "plot": _cmd_plot,
        "collect-demos": _cmd_collect,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError, envsim.MapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
