"""The episodic training loop shared by the query strategy and the loop
baselines.

Each iteration rolls out one full episode with the current policy (uniform
random actions during the initial exploration window), then replays its
transitions into the agent buffer with one gradient update per pushed step.
After the episode, the trajectory's uncertainty is measured and the query
strategy may request one episodic demonstration, whose transitions are
pushed to the demo buffer with one update per demo step.  Demo steps do not
consume the environment-step budget.
"""

from __future__ import annotations

import itertools
import statistics
from dataclasses import dataclass
from typing import Optional

from . import envsim, sac
from .config import ExperimentConfig
from .envsim import Action, MapSpec
from .evaluation import evaluate, seed_stream
from .replay import DualReplayBuffer, RecordSource, record_from_transition
from .runio import RunRecorder
from .strategy import (Feature, QueryState, decide, feature_of, observe,
                       sample_feature)
from .uncertainty import trajectory_uncertainty


@dataclass
class LoopResult:
    agent: sac.SacAgent
    env_steps: int
    episodes: int
    queries_used: int
    demo_failures: int
    curve: list  # (env_step, success_rate)


def _request_demo(demo_source, feature: Feature):
    """One re-attempt after a failure; afterwards the query budget stays
    spent and the query is skipped."""
    for attempt in (0, 1):
        try:
            return demo_source.provide_demo(feature), None
        except Exception as exc:  # noqa: BLE001 - logged and retried once
            error = f"{type(exc).__name__}: {exc}"
    return None, error


def run_loop(cfg: ExperimentConfig, map_spec: MapSpec, recorder: RunRecorder,
             demo_source=None, query_content: Optional[str] = None,
             preloaded_demos=()) -> LoopResult:
    """Run one training experiment.

    query_content: "argmax" queries the most uncertain recent feature,
    "uniform" keeps the timing rule but queries a uniform feature, and None
    never queries (the passive / plain settings).
    """
    assert query_content in (None, "argmax", "uniform")
    if query_content is not None and demo_source is None:
        raise ValueError("query modes need a demo_source")
    seed = cfg.seed
    rng_init = seed_stream(seed, "net-init")
    rng_explore = seed_stream(seed, "explore")
    rng_policy = seed_stream(seed, "policy-noise")
    rng_reset = seed_stream(seed, "env-reset")
    rng_update = seed_stream(seed, "update-noise")
    rng_uniform_query = seed_stream(seed, "uniform-query")

    agent = sac.make_agent(cfg.resolved_sac(), map_spec, rng_init)
    buffer = DualReplayBuffer(cfg.replay_capacity)
    for demo in preloaded_demos:
        buffer.push_demo_trajectory(demo)
        recorder.save_demo(demo, map_spec.name, seed=seed)

    qs = None
    if query_content is not None:
        qs = QueryState(n_h=cfg.n_h, r_query=cfg.resolved_r_query(), n_d=cfg.n_d)

    budget = cfg.env_step_budget
    env_step = 0
    episodes = 0
    demo_failures = 0
    u_since_record: list[float] = []
    curve: list[tuple[int, float]] = []

    def record_metrics() -> None:
        rate = evaluate(agent, map_spec, cfg.eval_episodes,
                        seed_stream(seed, "eval", env_step))
        curve.append((env_step, rate))
        mean_u = statistics.fmean(u_since_record) if u_since_record else None
        u_since_record.clear()
        recorder.metrics({
            "env_step": env_step,
            "eval_success_rate": rate,
            "episodes": episodes,
            "queries_used": qs.queried_demo if qs is not None else 0,
            "mean_rollout_uncertainty": mean_u,
        })

    def train_on(record) -> None:
        buffer.push(record)
        if env_step >= cfg.update_after:
            sac.update(agent, buffer.sample_balanced(cfg.batch_size, rng_update),
                       rng_update)

    while env_step < budget:
        tick = itertools.count(env_step)

        def behavior(state):
            if next(tick) < cfg.exploration_steps:
                return Action(float(rng_explore.uniform(-1.0, 1.0)),
                              float(rng_explore.uniform(-1.0, 1.0)))
            return sac.sample_action(agent, state, rng_policy).action

        traj = envsim.rollout(map_spec, behavior, rng_reset)

        for tr in traj.transitions:
            if env_step >= budget:
                break
            train_on(record_from_transition(tr, RecordSource.AGENT))
            env_step += 1
            if env_step % cfg.eval_every == 0:
                record_metrics()
        episodes += 1

        u = trajectory_uncertainty(agent, traj, cfg.uncertainty)
        u_since_record.append(u)

        if qs is None or env_step >= budget:
            continue
        feature = feature_of(traj, map_spec)
        observe(qs, feature, u)
        decision = decide(qs, u)
        if not decision.query:
            continue
        if query_content == "uniform":
            target = sample_feature(map_spec, rng_uniform_query)
        else:
            target = decision.feature
        demo, error = _request_demo(demo_source, target)
        recorder.query({
            "env_step": env_step,
            "episode": episodes,
            "feature": list(target.as_tuple()),
            "u_current": decision.u_current,
            "u_thres": decision.u_thres,
            "window_features": [list(f.as_tuple()) for f in decision.window_features],
            "window_u": list(decision.window_u),
            "queries_used": qs.queried_demo,
            "demo_ok": demo is not None,
            "demo_steps": len(demo) if demo is not None else None,
            "error": error,
        })
        if demo is None:
            demo_failures += 1
            continue
        for tr in demo.transitions:
            train_on(record_from_transition(tr, RecordSource.DEMO))
        buffer.demo_episodes += 1
        recorder.save_demo(demo, map_spec.name, seed=seed)

    return LoopResult(agent=agent, env_steps=env_step, episodes=episodes,
                      queries_used=qs.queried_demo if qs is not None else 0,
                      demo_failures=demo_failures, curve=curve)


def run_early(cfg: ExperimentConfig, map_spec: MapSpec, demo_source,
              recorder: RunRecorder) -> LoopResult:
    """The full query strategy: adaptive timing, argmax content."""
    return run_loop(cfg, map_spec, recorder, demo_source=demo_source,
                    query_content="argmax")


def run_plain_sac(cfg: ExperimentConfig, map_spec: MapSpec,
                  recorder: RunRecorder) -> LoopResult:
    """No demonstrations at all; the bare off-policy learner."""
    return run_loop(cfg, map_spec, recorder)
