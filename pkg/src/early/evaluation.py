"""Seed-stream derivation, policy evaluation, and convergence metrics."""

from __future__ import annotations

import hashlib
from typing import Optional, Sequence

import numpy as np

from . import envsim
from .envsim import Action, Cause, MapSpec
from .sac import SacAgent, mean_actions_batch


def _label_entropy(label) -> int:
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def seed_stream(master_seed: int, *labels) -> np.random.Generator:
    """Independent, reproducible generator for one named component of a run.

    Each (master seed, label path) pair maps to its own stream, so changing
    how one component consumes randomness leaves the others untouched.
    """
    entropy = [int(master_seed)] + [_label_entropy(l) for l in labels]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def evaluate(policy, map_spec: MapSpec, n_episodes: int, rng) -> float:
    """Fraction of deterministic roll-outs ending at the goal, over
    `n_episodes` fresh resets drawn from `rng`.

    `policy` is a SacAgent (evaluated with its mean action, all episodes
    advanced in lockstep for speed) or any State -> Action callable.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    if isinstance(policy, SacAgent):
        return _evaluate_lockstep(lambda obs: mean_actions_batch(policy, obs),
                                  map_spec, n_episodes, rng)
    if hasattr(policy, "act_batch"):
        return _evaluate_lockstep(policy.act_batch, map_spec, n_episodes, rng)
    successes = 0
    for _ in range(n_episodes):
        traj = envsim.rollout(map_spec, policy, rng)
        if traj.cause is Cause.GOAL:
            successes += 1
    return successes / n_episodes


def _evaluate_lockstep(act_batch, map_spec: MapSpec, n_episodes: int, rng) -> float:
    """All episodes advance in lockstep; one batched policy call per tick."""
    states = [envsim.reset(map_spec, rng) for _ in range(n_episodes)]
    active = list(range(n_episodes))
    step_count = 0
    successes = 0
    while active and step_count < map_spec.max_steps:
        obs = np.array([states[i].as_tuple() for i in active])
        acts = act_batch(obs)
        still = []
        for row, i in enumerate(active):
            result = envsim.step(map_spec, states[i],
                                 Action(acts[row, 0], acts[row, 1]), step_count)
            states[i] = result.next_state
            if result.done:
                if result.cause is Cause.GOAL:
                    successes += 1
            else:
                still.append(i)
        active = still
        step_count += 1
    return successes / n_episodes


def convergence_steps(curve: Sequence[tuple[int, float]], threshold: float,
                      patience: int) -> Optional[int]:
    """Smallest env step at which the success rate reaches `threshold` and
    holds it for `patience` consecutive records; None if it never does."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    if patience < 1:
        raise ValueError("patience must be >= 1")
    run = 0
    for i, (step, rate) in enumerate(curve):
        run = run + 1 if rate >= threshold else 0
        if run == patience:
            return curve[i - patience + 1][0]
    return None
