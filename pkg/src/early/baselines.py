"""Comparison methods isolating the query strategy: passive demo-then-training
on the same learner backbone, behavioral cloning, and a uniform-query
ablation that keeps the timing rule but randomizes the queried feature."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sac
from .config import ExperimentConfig
from .envsim import Action, MapSpec, State, Trajectory
from .evaluation import evaluate, seed_stream
from .nets import Mlp, adam_init, adam_step, mlp_backward, mlp_forward, mlp_init
from .runio import RunRecorder
from .strategy import sample_feature
from .training import LoopResult, run_loop


def collect_uniform_demos(map_spec: MapSpec, demo_source, n: int, rng) -> list[Trajectory]:
    """n demos at features drawn uniformly from the start (and goal) region."""
    demos = []
    for _ in range(n):
        demos.append(demo_source.provide_demo(sample_feature(map_spec, rng)))
    return demos


def run_passive_lfd(cfg: ExperimentConfig, map_spec: MapSpec, demo_source,
                    recorder: RunRecorder) -> LoopResult:
    """All demonstrations are collected up front at uniform features; the
    identical training loop then runs with zero queries."""
    demos = collect_uniform_demos(map_spec, demo_source, cfg.n_d,
                                  seed_stream(cfg.seed, "demo-collect"))
    return run_loop(cfg, map_spec, recorder, preloaded_demos=demos)


def run_uniform_query(cfg: ExperimentConfig, map_spec: MapSpec, demo_source,
                      recorder: RunRecorder) -> LoopResult:
    """Ablation: the query timing of the full strategy, uniform content."""
    return run_loop(cfg, map_spec, recorder, demo_source=demo_source,
                    query_content="uniform")


# ---------------------------------------------------------------------------
# Behavioral cloning.


class BcPolicy:
    """Deterministic policy head on the policy-net architecture: the squashed
    mean, no sampling."""

    def __init__(self, net: Mlp, obs_lo: np.ndarray, obs_hi: np.ndarray):
        self.net = net
        self.obs_lo = obs_lo
        self.obs_hi = obs_hi

    def act_batch(self, raw_obs: np.ndarray) -> np.ndarray:
        obs = sac.encode_obs(np.asarray(raw_obs, dtype=np.float64),
                                self.obs_lo, self.obs_hi)
        out, _ = mlp_forward(self.net, obs)
        return np.tanh(out[:, :sac.ACT_DIM])

    def __call__(self, state: State) -> Action:
        a = self.act_batch(np.array([state.as_tuple()]))[0]
        return Action(float(a[0]), float(a[1]))


def bc_loss(net: Mlp, obs_norm: np.ndarray, actions: np.ndarray):
    """Mean-squared regression of demo actions on states; returns
    (loss, flat gradient)."""
    n = len(obs_norm)
    out, cache = mlp_forward(net, obs_norm)
    pred = np.tanh(out[:, :sac.ACT_DIM])
    diff = pred - actions
    loss = 0.5 * float(np.sum(diff * diff)) / n
    gout = np.zeros_like(out)
    gout[:, :sac.ACT_DIM] = diff * (1.0 - pred * pred) / n
    grad, _ = mlp_backward(net, cache, gout)
    return loss, grad


def demos_to_arrays(demos) -> tuple[np.ndarray, np.ndarray]:
    states, actions = [], []
    for demo in demos:
        for t in demo.transitions:
            states.append(t.state.as_tuple())
            actions.append((t.action.vx, t.action.vy))
    return np.array(states), np.array(actions)


def _bc_train_epochs(net: Mlp, adam_state, obs: np.ndarray, actions: np.ndarray,
                     epochs: int, rng, lr: float, batch_size: int):
    n = len(obs)
    for _ in range(epochs):
        order = rng.permutation(n)
        for i in range(0, n, batch_size):
            idx = order[i:i + batch_size]
            _, grad = bc_loss(net, obs[idx], actions[idx])
            theta, adam_state = adam_step(net.theta, grad, adam_state, lr)
            net = net.with_theta(theta)
    return net, adam_state


def run_bc(demos, epochs: int, rng, map_spec: MapSpec,
           sac_cfg: sac.SacConfig, batch_size: int = 128) -> BcPolicy:
    """Fit the deterministic policy to all demo transitions by minibatch
    gradient descent; returns the fitted policy."""
    if not demos:
        raise ValueError("behavioral cloning needs at least one demo")
    states, actions = demos_to_arrays(demos)
    lo, hi = sac.obs_bounds(map_spec)
    obs = sac.encode_obs(states, lo, hi)
    net = mlp_init((sac.ENC_DIM, *sac_cfg.hidden, 2 * sac.ACT_DIM), rng,
                   out_scale=sac_cfg.policy_out_scale)
    net, _ = _bc_train_epochs(net, adam_init(net.theta.size), obs, actions,
                              epochs, rng, sac_cfg.lr, batch_size)
    return BcPolicy(net, lo, hi)


@dataclass
class BcResult:
    policy: BcPolicy
    curve: list
    n_demos: int


def run_bc_experiment(cfg: ExperimentConfig, map_spec: MapSpec, demo_source,
                      recorder: RunRecorder) -> BcResult:
    """BC packaged on the common metrics grid: training epochs are spread
    across the env-step axis so every method shares one metrics schema
    (BC itself consumes no environment steps)."""
    seed = cfg.seed
    demos = collect_uniform_demos(map_spec, demo_source, cfg.n_d,
                                  seed_stream(seed, "demo-collect"))
    for demo in demos:
        recorder.save_demo(demo, map_spec.name, seed=seed)
    rng_init = seed_stream(seed, "net-init")
    rng_bc = seed_stream(seed, "bc-shuffle")
    n_records = cfg.env_step_budget // cfg.eval_every
    per_record = [cfg.bc_epochs // n_records] * n_records
    for i in range(cfg.bc_epochs % n_records):
        per_record[i] += 1

    sac_cfg = cfg.resolved_sac()
    net = mlp_init((sac.ENC_DIM, *sac_cfg.hidden, 2 * sac.ACT_DIM), rng_init,
                   out_scale=sac_cfg.policy_out_scale)
    adam_state = adam_init(net.theta.size)
    lo, hi = sac.obs_bounds(map_spec)
    states, actions = demos_to_arrays(demos)
    obs = sac.encode_obs(states, lo, hi)
    curve = []
    for rec_i, n_epochs in enumerate(per_record):
        net, adam_state = _bc_train_epochs(net, adam_state, obs, actions,
                                           n_epochs, rng_bc, sac_cfg.lr,
                                           cfg.batch_size)
        policy = BcPolicy(net, lo, hi)
        env_step = (rec_i + 1) * cfg.eval_every
        rate = evaluate(policy, map_spec, cfg.eval_episodes,
                        seed_stream(seed, "eval", env_step))
        curve.append((env_step, rate))
        recorder.metrics({
            "env_step": env_step,
            "eval_success_rate": rate,
            "episodes": 0,
            "queries_used": 0,
            "mean_rollout_uncertainty": None,
        })
    return BcResult(policy=policy, curve=curve, n_demos=len(demos))
