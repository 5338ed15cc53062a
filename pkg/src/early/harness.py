"""Experiment orchestration: map resolution, seeded run dispatch, summary
and checkpoint writing, and learning-curve plots."""

from __future__ import annotations

import importlib.resources
import os
import time
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import baselines, demoserve, envsim, training
from .config import TASKS, ExperimentConfig, config_to_dict
from .evaluation import convergence_steps, seed_stream
from .nets import save_checkpoint
from .oracle import OracleDemoSource
from .runio import RunRecorder, load_run
from .sac import save_agent

CONVERGENCE_THRESHOLD = 0.9
CONVERGENCE_PATIENCE = 3


def load_task_map(task: str) -> envsim.MapSpec:
    """Resolve a task name to a shipped map, or load a map file path."""
    if task in TASKS:
        ref = importlib.resources.files("early").joinpath("maps", task)
        with importlib.resources.as_file(ref) as path:
            return envsim.load_map(path)
    return envsim.load_map(task)


def make_oracle_source(cfg: ExperimentConfig, map_spec: envsim.MapSpec) -> OracleDemoSource:
    return OracleDemoSource(map_spec, cfg.rrt, seed_stream(cfg.seed, "oracle"))


def run_experiment(cfg: ExperimentConfig, out_dir, demo_source=None) -> dict:
    """Dispatch one run, write its artifacts, and return the summary."""
    cfg.validate()
    map_spec = load_task_map(cfg.task)
    recorder = RunRecorder(out_dir)
    recorder.write_config(config_to_dict(cfg))

    needs_demos = cfg.method in ("early", "uniform", "passive", "bc")
    server = None
    if demo_source is None and needs_demos:
        if cfg.demo_source == "human":
            server = demoserve.serve(
                map_spec, port=cfg.port, n_d=cfg.n_d,
                session_log_path=os.path.join(recorder.root, "session.jsonl"))
            demo_source = server
            print(f"waiting for a teleoperation client on ws://127.0.0.1:{server.port}")
        else:
            demo_source = make_oracle_source(cfg, map_spec)

    t0 = time.perf_counter()
    try:
        # the nets are tiny; multi-threaded BLAS only adds sync overhead and
        # oversubscribes when seeds run in parallel
        with threadpool_limits(limits=1):
            if cfg.method == "early":
                result = training.run_early(cfg, map_spec, demo_source, recorder)
            elif cfg.method == "uniform":
                result = baselines.run_uniform_query(cfg, map_spec, demo_source,
                                                     recorder)
            elif cfg.method == "passive":
                result = baselines.run_passive_lfd(cfg, map_spec, demo_source,
                                                   recorder)
            elif cfg.method == "sac":
                result = training.run_plain_sac(cfg, map_spec, recorder)
            else:
                result = baselines.run_bc_experiment(cfg, map_spec, demo_source,
                                                     recorder)
    finally:
        if server is not None:
            server.close()
    wall = time.perf_counter() - t0

    if isinstance(result, training.LoopResult):
        save_agent(recorder.checkpoint_path("final.npz"), result.agent)
        env_steps, episodes = result.env_steps, result.episodes
        queries = result.queries_used
    else:  # BC
        save_checkpoint(recorder.checkpoint_path("final.npz"),
                        {"policy": result.policy.net},
                        meta={"kind": "bc-policy",
                              "obs_lo": list(result.policy.obs_lo),
                              "obs_hi": list(result.policy.obs_hi)})
        env_steps, episodes, queries = 0, 0, 0

    curve = result.curve
    final_success = curve[-1][1] if curve else 0.0
    conv = convergence_steps(curve, CONVERGENCE_THRESHOLD, CONVERGENCE_PATIENCE)
    summary = {
        "task": cfg.task,
        "method": cfg.method,
        "seed": cfg.seed,
        "env_steps": env_steps,
        "episodes": episodes,
        "queries_used": queries,
        "final_success": final_success,
        "convergence_step": conv,
        "convergence_threshold": CONVERGENCE_THRESHOLD,
        "wall_seconds": wall,
    }
    recorder.summary(summary)
    print(f"[{cfg.task}/{cfg.method}/seed {cfg.seed}] final success "
          f"{final_success:.3f}, convergence "
          f"{conv if conv is not None else 'not reached'}, "
          f"{wall:.1f}s wall")
    return summary


def emit_plot(run_dirs: Sequence, out_path) -> str:
    """Learning curves: per-method mean success rate over env steps with a
    +-1 standard deviation band across seeds.  Writes a vector graphic."""
    from matplotlib.figure import Figure

    runs = [load_run(d) for d in run_dirs]
    if not runs:
        raise ValueError("no run directories given")
    by_method: dict[str, list] = {}
    for run in runs:
        method = run["config"].get("method", "?")
        records = [r for r in run["metrics"] if r.get("eval_success_rate") is not None]
        if not records:
            raise ValueError(f"run {run['dir']} has no metrics records")
        by_method.setdefault(method, []).append(
            {r["env_step"]: r["eval_success_rate"] for r in records})

    fig = Figure(figsize=(7, 4.5))
    ax = fig.subplots()
    for method in sorted(by_method):
        curves = by_method[method]
        steps = sorted(set.intersection(*(set(c.keys()) for c in curves)))
        if not steps:
            raise ValueError(f"method {method}: runs share no env steps")
        mat = np.array([[c[s] for s in steps] for c in curves])
        mean = mat.mean(axis=0)
        std = mat.std(axis=0)
        line, = ax.plot(steps, mean, label=f"{method} (n={len(curves)})")
        ax.fill_between(steps, mean - std, mean + std,
                        alpha=0.2, color=line.get_color())
    ax.set_xlabel("environment steps")
    ax.set_ylabel("evaluation success rate")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)
    out_path = str(out_path)
    if not os.path.splitext(out_path)[1]:
        out_path += ".svg"
    fig.savefig(out_path, format=os.path.splitext(out_path)[1].lstrip("."))
    return out_path
