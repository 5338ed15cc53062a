"""Trajectory-level uncertainty from temporal-difference errors.

The TD error of step t uses the action actually taken at the next step of
the same trajectory; by default the next-step Q is NOT discounted
(gamma_in_td = 1.0), with the conventional discount one config flip away.
An episode's uncertainty is the mean absolute TD error over its steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .envsim import Action, Trajectory, Transition
from .sac import SacAgent, q_values


@dataclass(frozen=True)
class UncertaintyConfig:
    gamma_in_td: float = 1.0
    q_reduction: str = "min_twin"  # "min_twin" | "q1"

    def __post_init__(self):
        if not 0.0 <= self.gamma_in_td <= 1.0:
            raise ValueError("gamma_in_td must be in [0, 1]")
        if self.q_reduction not in ("min_twin", "q1"):
            raise ValueError(f"unknown q_reduction {self.q_reduction!r}")


def _q(agent: SacAgent, states_raw: np.ndarray, actions: np.ndarray,
       cfg: UncertaintyConfig) -> np.ndarray:
    q1v, q2v = q_values(agent, agent.encode(states_raw), actions)
    return np.minimum(q1v, q2v) if cfg.q_reduction == "min_twin" else q1v


def td_error(agent: SacAgent, transition: Transition,
             next_action: Optional[Action],
             cfg: UncertaintyConfig = UncertaintyConfig()) -> float:
    """delta = r_scaled + gamma_in_td * Q(s', a') - Q(s, a); the Q(s', a')
    term is dropped on terminal transitions (no next action exists)."""
    r = transition.reward * agent.cfg.reward_scale
    q_sa = _q(agent, np.array([transition.state.as_tuple()]),
              np.array([[transition.action.vx, transition.action.vy]]), cfg)[0]
    if transition.done:
        return float(r - q_sa)
    if next_action is None:
        raise ValueError("non-terminal transition needs the next action")
    q_next = _q(agent, np.array([transition.next_state.as_tuple()]),
                np.array([[next_action.vx, next_action.vy]]), cfg)[0]
    return float(r + cfg.gamma_in_td * q_next - q_sa)


def trajectory_uncertainty(agent: SacAgent, trajectory: Trajectory,
                           cfg: UncertaintyConfig = UncertaintyConfig()) -> float:
    """Mean absolute TD error over all steps of the trajectory."""
    n = len(trajectory)
    if n == 0:
        raise ValueError("empty trajectory")
    states = np.array([t.state.as_tuple() for t in trajectory.transitions])
    actions = np.array([(t.action.vx, t.action.vy) for t in trajectory.transitions])
    rewards = np.array([t.reward for t in trajectory.transitions])
    q = _q(agent, states, actions, cfg)
    delta = rewards * agent.cfg.reward_scale - q
    # chaining invariant: step t's next state/action are row t+1
    delta[:-1] += cfg.gamma_in_td * q[1:]
    return float(np.mean(np.abs(delta)))
