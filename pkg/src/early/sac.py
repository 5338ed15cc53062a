"""Soft actor-critic learner on the hand-rolled MLP substrate.

Squashed-Gaussian policy, twin Q nets, value net and a slow target value
net.  The three losses return analytic gradients (validated against finite
differences in the test suite); rewards are scaled inside the learner so the
+-1000 terminal rewards become +-10 at the critics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .envsim import (COLLISION_REWARD, GOAL_REWARD, STEP_REWARD, Action,
                     MapSpec, State)
from .nets import (adam_init, adam_step, load_checkpoint, mlp_forward,
                   mlp_backward, mlp_init, save_checkpoint)

OBS_DIM = 4   # raw observation: (x, y, x_goal, y_goal)
ENC_DIM = 6   # net input: normalized raw + goal-relative offset
ACT_DIM = 2
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class SacConfig:
    hidden: tuple[int, ...] = (256, 256)
    lr: float = 3e-4
    gamma: float = 0.99
    tau: float = 0.005
    alpha: float = 0.05
    reward_scale: float = 0.01
    log_std_min: float = -20.0
    log_std_max: float = 2.0
    squash_eps: float = 1e-6
    policy_out_scale: float = 0.01
    # value targets are clipped to the feasible return range of the task:
    # the goal cannot be reached faster than straight-line flight at max
    # speed, which upper-bounds the value of every state.  Unclipped
    # bootstrapping lets the critics drift upward until the value landscape
    # flattens and the policy diffuses.
    clip_targets: bool = True
    # L2 penalty on the raw policy head outputs (pre-squash mean and raw
    # log-std), keeping tanh out of saturation
    policy_reg: float = 1e-3
    # the policy head moves an order of magnitude slower than the critics;
    # at the shared lr it chases transient critic wobbles off the optimum
    policy_lr: Optional[float] = 5e-5
    # L2-norm ceiling applied to each net's gradient before Adam (None: off);
    # terminal-reward outliers otherwise dominate whole-batch critic steps
    grad_clip: Optional[float] = None


def obs_bounds(map_spec: MapSpec) -> tuple[np.ndarray, np.ndarray]:
    b = map_spec.bounds
    lo = np.array([b.xmin, b.ymin, b.xmin, b.ymin], dtype=np.float64)
    hi = np.array([b.xmax, b.ymax, b.xmax, b.ymax], dtype=np.float64)
    return lo, hi


def encode_obs(raw: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Net input for a raw (pos, goal) observation batch: each coordinate
    mapped onto [-1, 1], plus the goal-relative offset in the same scale.
    The offset spares the nets from re-deriving pos-goal geometry, which
    dominates value structure on random-goal tasks."""
    raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
    norm = 2.0 * (raw - lo) / (hi - lo) - 1.0
    span = hi[:2] - lo[:2]
    delta = (raw[:, 2:4] - raw[:, 0:2]) / span
    return np.concatenate([norm, delta], axis=1)


class SacAgent:
    """Parameter bundle plus optimizer states; a single training thread owns
    all mutation, read-only snapshots are safe to share."""

    def __init__(self, cfg: SacConfig, q1, q2, v, v_target, policy,
                 obs_lo, obs_hi, target_lo=-np.inf, goal_radius=1.0):
        self.cfg = cfg
        self.q1, self.q2 = q1, q2
        self.v, self.v_target = v, v_target
        self.policy = policy
        self.obs_lo, self.obs_hi = obs_lo, obs_hi
        self.target_lo = target_lo
        self.goal_radius = goal_radius
        self.adam = {name: adam_init(getattr(self, name).theta.size)
                     for name in ("q1", "q2", "v", "policy")}

    def value_upper_bound(self, raw_states: np.ndarray) -> np.ndarray:
        """Best achievable return from each state: straight-line flight at
        max speed sqrt(2), step costs included.  Admissible (obstacles can
        only make the true value lower)."""
        cfg = self.cfg
        dist = np.hypot(raw_states[:, 0] - raw_states[:, 2],
                        raw_states[:, 1] - raw_states[:, 3])
        n = np.maximum(1.0, np.ceil(np.maximum(0.0, dist - self.goal_radius)
                                    / math.sqrt(2.0)))
        g_pow = cfg.gamma ** (n - 1.0)
        if cfg.gamma == 1.0:
            step_costs = n - 1.0
        else:
            step_costs = (1.0 - g_pow) / (1.0 - cfg.gamma)
        return cfg.reward_scale * (GOAL_REWARD * g_pow + STEP_REWARD * step_costs)

    def clip_value(self, values: np.ndarray, raw_states: np.ndarray) -> np.ndarray:
        if not self.cfg.clip_targets:
            return values
        return np.clip(values, self.target_lo, self.value_upper_bound(raw_states))

    def encode(self, raw: np.ndarray) -> np.ndarray:
        return encode_obs(raw, self.obs_lo, self.obs_hi)

    def encode_state(self, state: State) -> np.ndarray:
        return self.encode(np.array(state.as_tuple()))


def make_agent(cfg: SacConfig, map_spec: MapSpec, rng) -> SacAgent:
    h = cfg.hidden
    q_sizes = (ENC_DIM + ACT_DIM, *h, 1)
    v_sizes = (ENC_DIM, *h, 1)
    pi_sizes = (ENC_DIM, *h, 2 * ACT_DIM)
    q1 = mlp_init(q_sizes, rng)
    q2 = mlp_init(q_sizes, rng)
    v = mlp_init(v_sizes, rng)
    v_target = v.copy()
    policy = mlp_init(pi_sizes, rng, out_scale=cfg.policy_out_scale)
    lo, hi = obs_bounds(map_spec)
    target_lo = cfg.reward_scale * (COLLISION_REWARD + STEP_REWARD * map_spec.max_steps)
    return SacAgent(cfg, q1, q2, v, v_target, policy, lo, hi,
                    target_lo=target_lo, goal_radius=map_spec.goal_radius)


# ---------------------------------------------------------------------------
# Policy head.


def policy_dist(agent: SacAgent, obs_norm: np.ndarray):
    """Forward the policy net: (mu, clamped log_std, raw log_std, cache)."""
    out, cache = mlp_forward(agent.policy, obs_norm)
    batched = out.ndim == 2
    if not batched:
        out = out[None, :]
    mu = out[:, :ACT_DIM]
    log_std_raw = out[:, ACT_DIM:]
    log_std = np.clip(log_std_raw, agent.cfg.log_std_min, agent.cfg.log_std_max)
    return mu, log_std, log_std_raw, cache


def _squash(mu, log_std, eps, squash_eps):
    """u = mu + sigma*eps, a = tanh(u), and the per-sample log density of a
    under the squashed Gaussian (change-of-variables correction included)."""
    sigma = np.exp(log_std)
    u = mu + sigma * eps
    a = np.tanh(u)
    one_minus_sq = 1.0 - a * a
    log_prob = np.sum(-0.5 * eps * eps - log_std - 0.5 * LOG_2PI
                      - np.log(one_minus_sq + squash_eps), axis=1)
    return u, a, sigma, one_minus_sq, log_prob


class ActionSample(NamedTuple):
    action: Action
    pre_squash: np.ndarray
    log_prob: float


def sample_action(agent: SacAgent, state: State, rng) -> ActionSample:
    obs = agent.encode_state(state)
    mu, log_std, _, _ = policy_dist(agent, obs)
    eps = rng.standard_normal(ACT_DIM)
    u, a, _, _, log_prob = _squash(mu, log_std, eps[None, :], agent.cfg.squash_eps)
    return ActionSample(Action(float(a[0, 0]), float(a[0, 1])), u[0], float(log_prob[0]))


def mean_action(agent: SacAgent, state: State) -> Action:
    """Deterministic evaluation action: tanh of the policy mean."""
    obs = agent.encode_state(state)
    mu, _, _, _ = policy_dist(agent, obs)
    a = np.tanh(mu[0])
    return Action(float(a[0]), float(a[1]))


def mean_actions_batch(agent: SacAgent, raw_obs: np.ndarray) -> np.ndarray:
    """Vectorized mean_action over an (n, 4) batch of raw observations."""
    mu, _, _, _ = policy_dist(agent, agent.encode(raw_obs))
    return np.tanh(mu)


def q_values(agent: SacAgent, obs_norm: np.ndarray, actions: np.ndarray):
    qin = np.concatenate([obs_norm, actions], axis=1)
    q1v, _ = mlp_forward(agent.q1, qin)
    q2v, _ = mlp_forward(agent.q2, qin)
    return q1v[:, 0], q2v[:, 0]


# ---------------------------------------------------------------------------
# Losses.  Each returns (scalar objective, flat gradients for its own net(s)).
# Fresh-noise arguments are explicit so the finite-difference suite can pin
# them down.


def value_loss(agent: SacAgent, states_raw: np.ndarray, eps: np.ndarray):
    """J_V: fit V(s) to min_k Q_k(s, a~) - alpha * log pi(a~|s) with a fresh
    reparameterized sample a~ per state; the target is held constant."""
    if len(states_raw) == 0:
        raise ValueError("empty batch")
    n = len(states_raw)
    obs = agent.encode(states_raw)
    mu, log_std, _, _ = policy_dist(agent, obs)
    _, a, _, _, log_prob = _squash(mu, log_std, eps, agent.cfg.squash_eps)
    q1v, q2v = q_values(agent, obs, a)
    target = agent.clip_value(np.minimum(q1v, q2v) - agent.cfg.alpha * log_prob,
                              states_raw)
    v_out, v_cache = mlp_forward(agent.v, obs)
    diff = v_out[:, 0] - target
    loss = 0.5 * float(np.mean(diff * diff))
    grad_v, _ = mlp_backward(agent.v, v_cache, (diff / n)[:, None])
    return loss, grad_v


def q_loss(agent: SacAgent, batch):
    """J_Q summed over the twin critics against the target-value bootstrap
    Q_hat = r_scaled + gamma * (1 - done) * V_target(s')."""
    n = len(batch.states)
    if n == 0:
        raise ValueError("empty batch")
    obs = agent.encode(batch.states)
    obs_next = agent.encode(batch.next_states)
    r_scaled = batch.rewards * agent.cfg.reward_scale
    vt_out, _ = mlp_forward(agent.v_target, obs_next)
    v_next = agent.clip_value(vt_out[:, 0], batch.next_states)
    q_hat = r_scaled + agent.cfg.gamma * (1.0 - batch.dones) * v_next
    qin = np.concatenate([obs, batch.actions], axis=1)
    loss = 0.0
    grads = []
    for net in (agent.q1, agent.q2):
        q_out, cache = mlp_forward(net, qin)
        diff = q_out[:, 0] - q_hat
        loss += 0.5 * float(np.mean(diff * diff))
        grad, _ = mlp_backward(net, cache, (diff / n)[:, None])
        grads.append(grad)
    return loss, grads[0], grads[1]


def policy_loss(agent: SacAgent, states_raw: np.ndarray, eps: np.ndarray):
    """J_pi = mean[alpha * log pi(f(eps;s)|s) - min_k Q_k(s, f(eps;s))].

    The gradient flows through the reparameterized action into both terms;
    Q parameters stay frozen.  Returns (loss, grad_policy, mean alpha*logpi).
    """
    if len(states_raw) == 0:
        raise ValueError("empty batch")
    n = len(states_raw)
    cfg = agent.cfg
    obs = agent.encode(states_raw)
    mu, log_std, log_std_raw, p_cache = policy_dist(agent, obs)
    _, a, sigma, one_minus_sq, log_prob = _squash(mu, log_std, eps, cfg.squash_eps)

    qin = np.concatenate([obs, a], axis=1)
    q1_out, c1 = mlp_forward(agent.q1, qin)
    q2_out, c2 = mlp_forward(agent.q2, qin)
    q1v, q2v = q1_out[:, 0], q2_out[:, 0]
    use1 = q1v <= q2v
    q_min = np.where(use1, q1v, q2v)
    reg = 0.5 * cfg.policy_reg * float(
        np.sum(mu * mu + log_std_raw * log_std_raw)) / n
    loss = float(np.mean(cfg.alpha * log_prob - q_min)) + reg

    # dJ/da through the argmin critic (parameter grads of Q discarded).
    gout1 = np.where(use1, -1.0 / n, 0.0)[:, None]
    gout2 = np.where(use1, 0.0, -1.0 / n)[:, None]
    _, gin1 = mlp_backward(agent.q1, c1, gout1)
    _, gin2 = mlp_backward(agent.q2, c2, gout2)
    dj_da = (gin1 + gin2)[:, ENC_DIM:]
    # ... plus the squash correction inside log pi.
    dj_da = dj_da + (cfg.alpha / n) * 2.0 * a / (one_minus_sq + cfg.squash_eps)

    dj_du = dj_da * one_minus_sq
    g_mu = dj_du
    g_log_std = dj_du * sigma * eps - cfg.alpha / n
    in_range = (log_std_raw > cfg.log_std_min) & (log_std_raw < cfg.log_std_max)
    g_log_std = np.where(in_range, g_log_std, 0.0)
    # the head regularizer acts on the raw outputs, through the clamp
    g_mu = g_mu + cfg.policy_reg * mu / n
    g_log_std = g_log_std + cfg.policy_reg * log_std_raw / n
    gout_policy = np.concatenate([g_mu, g_log_std], axis=1)
    grad_policy, _ = mlp_backward(agent.policy, p_cache, gout_policy)
    return loss, grad_policy, float(np.mean(cfg.alpha * log_prob))


def soft_update_target(agent: SacAgent, tau: Optional[float] = None) -> SacAgent:
    """v_target <- tau * v + (1 - tau) * v_target, elementwise."""
    t = agent.cfg.tau if tau is None else tau
    agent.v_target = agent.v_target.with_theta(
        t * agent.v.theta + (1.0 - t) * agent.v_target.theta)
    return agent


@dataclass
class UpdateMetrics:
    value_loss: float
    q_loss: float
    policy_loss: float
    mean_alpha_log_pi: float


def _clipped(grad: np.ndarray, ceiling: Optional[float]) -> np.ndarray:
    if ceiling is None:
        return grad
    norm = float(np.linalg.norm(grad))
    return grad * (ceiling / norm) if norm > ceiling else grad


def update(agent: SacAgent, batch, rng) -> UpdateMetrics:
    """One training iteration: Adam steps in order (V, Q1/Q2, pi), then the
    soft target update."""
    n = len(batch.states)
    eps_v = rng.standard_normal((n, ACT_DIM))
    eps_pi = rng.standard_normal((n, ACT_DIM))
    lr = agent.cfg.lr
    clip = agent.cfg.grad_clip

    jv, grad_v = value_loss(agent, batch.states, eps_v)
    grad_v = _clipped(grad_v, clip)
    theta, agent.adam["v"] = adam_step(agent.v.theta, grad_v, agent.adam["v"], lr)
    agent.v = agent.v.with_theta(theta)

    jq, grad_q1, grad_q2 = q_loss(agent, batch)
    theta, agent.adam["q1"] = adam_step(agent.q1.theta, _clipped(grad_q1, clip),
                                        agent.adam["q1"], lr)
    agent.q1 = agent.q1.with_theta(theta)
    theta, agent.adam["q2"] = adam_step(agent.q2.theta, _clipped(grad_q2, clip),
                                        agent.adam["q2"], lr)
    agent.q2 = agent.q2.with_theta(theta)

    jpi, grad_pi, ent = policy_loss(agent, batch.states, eps_pi)
    grad_pi = _clipped(grad_pi, clip)
    pi_lr = agent.cfg.policy_lr if agent.cfg.policy_lr is not None else lr
    theta, agent.adam["policy"] = adam_step(agent.policy.theta, grad_pi,
                                            agent.adam["policy"], pi_lr)
    agent.policy = agent.policy.with_theta(theta)

    soft_update_target(agent)
    return UpdateMetrics(jv, jq, jpi, ent)


# ---------------------------------------------------------------------------
# Checkpointing: the netfa format with the agent's scalars in the header.


def save_agent(path, agent: SacAgent) -> None:
    nets = {"q1": agent.q1, "q2": agent.q2, "v": agent.v,
            "v_target": agent.v_target, "policy": agent.policy}
    meta = {
        "kind": "sac-agent",
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in vars(agent.cfg).items()},
        "obs_lo": list(agent.obs_lo),
        "obs_hi": list(agent.obs_hi),
        "target_lo": agent.target_lo,
        "goal_radius": agent.goal_radius,
    }
    save_checkpoint(path, nets, adam=agent.adam, meta=meta)


def load_agent(path) -> SacAgent:
    nets, adam, meta = load_checkpoint(path)
    if meta.get("kind") != "sac-agent":
        raise ValueError(f"not an agent checkpoint: {path}")
    raw_cfg = dict(meta["config"])
    raw_cfg["hidden"] = tuple(raw_cfg["hidden"])
    cfg = SacConfig(**raw_cfg)
    agent = SacAgent(cfg, nets["q1"], nets["q2"], nets["v"], nets["v_target"],
                     nets["policy"], np.array(meta["obs_lo"]), np.array(meta["obs_hi"]),
                     target_lo=meta.get("target_lo", -np.inf),
                     goal_radius=meta.get("goal_radius", 1.0))
    agent.adam.update(adam)
    return agent
