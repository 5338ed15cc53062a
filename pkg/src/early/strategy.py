"""Episodic query strategy: shifting feature/uncertainty histories, an
adaptive ratio threshold over the recent window, and argmax feature
selection under a fixed demonstration budget.

The decision rule, with a window that has just grown to its transient
length N_h + 1: sort the uncertainty history descending, read the threshold
at index floor(N_h * r_query), and query the most uncertain feature of the
whole window iff the current episode's uncertainty strictly exceeds the
threshold and budget remains.  A queried feature leaves the window (its
uncertainty has been addressed; keeping it would re-query the same stale
maximum for up to N_h further episodes and concentrate the whole budget on
a handful of features).  Otherwise the oldest element is dropped, so the
steady-state window length is N_h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .envsim import MapSpec, Trajectory, Vec2


@dataclass(frozen=True)
class Feature:
    """Initial state of an episode: position, plus the goal for random-goal
    tasks (the initial state contains the goal there)."""

    pos: Vec2
    goal: Optional[Vec2] = None

    def as_tuple(self) -> tuple:
        if self.goal is None:
            return (self.pos.x, self.pos.y)
        return (self.pos.x, self.pos.y, self.goal.x, self.goal.y)


def feature_of(trajectory: Trajectory, map_spec: MapSpec) -> Feature:
    if len(trajectory) == 0:
        raise ValueError("empty trajectory")
    s0 = trajectory.start_state
    return Feature(s0.pos, s0.goal if map_spec.random_goal else None)


def sample_feature(map_spec: MapSpec, rng) -> Feature:
    """Uniform draw from the start (and, for random-goal tasks, goal) region."""
    pos = map_spec.start_region.sample(rng)
    goal = map_spec.goal_region.sample(rng) if map_spec.random_goal else None
    return Feature(pos, goal)


@dataclass(frozen=True)
class QueryDecision:
    query: bool
    feature: Optional[Feature] = None
    u_current: float = math.nan
    u_thres: float = math.nan
    window_features: tuple = ()
    window_u: tuple = ()


@dataclass
class QueryState:
    n_h: int
    r_query: float
    n_d: int
    features: list = field(default_factory=list)
    uncertainties: list = field(default_factory=list)
    queried_demo: int = 0

    def __post_init__(self):
        if not 0.0 <= self.r_query <= 1.0:
            raise ValueError("r_query must be in [0, 1]")
        if self.n_h < 0 or self.n_d < 0:
            raise ValueError("n_h and n_d must be non-negative")

    @property
    def idx_thres(self) -> int:
        return math.floor(self.n_h * self.r_query)

    @property
    def budget_left(self) -> int:
        return self.n_d - self.queried_demo


def observe(qs: QueryState, feature: Feature, u: float) -> None:
    """Append the episode's (feature, uncertainty) pair to the histories."""
    if not math.isfinite(u):
        raise ValueError(f"uncertainty must be finite, got {u}")
    qs.features.append(feature)
    qs.uncertainties.append(u)


def decide(qs: QueryState, u_current: float) -> QueryDecision:
    """Run the query check for the episode just observed.  Call immediately
    after observe(); u_current must be the last appended uncertainty."""
    if len(qs.features) < qs.n_h + 1:
        return QueryDecision(query=False, u_current=u_current)

    window_features = tuple(qs.features)
    window_u = tuple(qs.uncertainties)
    u_thres = sorted(qs.uncertainties, reverse=True)[qs.idx_thres]
    decision = QueryDecision(query=False, u_current=u_current, u_thres=u_thres,
                             window_features=window_features, window_u=window_u)
    if u_current > u_thres and qs.queried_demo < qs.n_d:
        best = max(range(len(qs.uncertainties)),
                   key=lambda i: (qs.uncertainties[i], -i))
        decision = QueryDecision(query=True, feature=qs.features[best],
                                 u_current=u_current, u_thres=u_thres,
                                 window_features=window_features,
                                 window_u=window_u)
        qs.queried_demo += 1
        qs.features.pop(best)
        qs.uncertainties.pop(best)
    else:
        qs.features.pop(0)
        qs.uncertainties.pop(0)
    return decision
