"""Deterministic continuous 2D navigation simulator with sparse rewards.

The agent is a point moving inside an axis-aligned rectangular map with
rectangular obstacles.  One step displaces the agent by the (clamped) action
with dt = 1.0.  Events are resolved along the motion segment, earliest first:
touching the boundary or an obstacle ends the episode with a large penalty,
entering the goal disc ends it with a large bonus, and every ordinary step
costs -1 until the step limit runs out.
"""

from __future__ import annotations

import enum
import json
import math
import os
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

DT = 1.0
STEP_REWARD = -1.0
COLLISION_REWARD = -1000.0
GOAL_REWARD = 1000.0

REGION_TOL = 1e-6


class MapError(ValueError):
    """Raised when a map file fails to parse or violates an invariant."""


class Vec2(NamedTuple):
    x: float
    y: float


class Rect(NamedTuple):
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, p: Vec2) -> bool:
        """Closed-rectangle membership (boundary counts as inside)."""
        return self.xmin <= p.x <= self.xmax and self.ymin <= p.y <= self.ymax

    def overlaps(self, other: "Rect") -> bool:
        """Closed rectangles: touching edges count as overlap."""
        return (self.xmin <= other.xmax and other.xmin <= self.xmax
                and self.ymin <= other.ymax and other.ymin <= self.ymax)


@dataclass(frozen=True)
class Region:
    """Sampling region for start/goal positions: a point, a horizontal
    segment, or an axis-aligned rectangle."""

    kind: str  # "point" | "segment" | "rect"
    point: Optional[Vec2] = None
    x0: float = 0.0
    x1: float = 0.0
    y: float = 0.0
    rect: Optional[Rect] = None

    def sample(self, rng) -> Vec2:
        if self.kind == "point":
            return self.point
        if self.kind == "segment":
            return Vec2(rng.uniform(self.x0, self.x1), self.y)
        r = self.rect
        return Vec2(rng.uniform(r.xmin, r.xmax), rng.uniform(r.ymin, r.ymax))

    def contains(self, p: Vec2, tol: float = REGION_TOL) -> bool:
        if self.kind == "point":
            return abs(p.x - self.point.x) <= tol and abs(p.y - self.point.y) <= tol
        if self.kind == "segment":
            lo, hi = min(self.x0, self.x1), max(self.x0, self.x1)
            return abs(p.y - self.y) <= tol and lo - tol <= p.x <= hi + tol
        r = self.rect
        return (r.xmin - tol <= p.x <= r.xmax + tol
                and r.ymin - tol <= p.y <= r.ymax + tol)

    def bounding_rect(self) -> Rect:
        if self.kind == "point":
            return Rect(self.point.x, self.point.y, self.point.x, self.point.y)
        if self.kind == "segment":
            lo, hi = min(self.x0, self.x1), max(self.x0, self.x1)
            return Rect(lo, self.y, hi, self.y)
        return self.rect

    def is_point(self) -> bool:
        return self.kind == "point"


@dataclass(frozen=True)
class MapSpec:
    name: str
    bounds: Rect
    obstacles: tuple[Rect, ...]
    start_region: Region
    goal_region: Region
    goal_radius: float = 1.0
    max_steps: int = 200

    @property
    def random_goal(self) -> bool:
        return not self.goal_region.is_point()


class State(NamedTuple):
    pos: Vec2
    goal: Vec2

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.pos.x, self.pos.y, self.goal.x, self.goal.y)


class Action(NamedTuple):
    vx: float
    vy: float


class Cause(enum.Enum):
    NONE = "none"
    GOAL = "goal"
    COLLISION = "collision"
    TIMEOUT = "timeout"


class StepResult(NamedTuple):
    next_state: State
    reward: float
    done: bool
    cause: Cause


class Transition(NamedTuple):
    state: State
    action: Action
    reward: float
    next_state: State
    done: bool
    cause: Cause


class Source(enum.Enum):
    AGENT = "agent"
    ORACLE = "oracle"
    HUMAN = "human"


@dataclass
class Trajectory:
    transitions: list[Transition]
    source: Source = Source.AGENT

    def __len__(self) -> int:
        return len(self.transitions)

    @property
    def start_state(self) -> State:
        return self.transitions[0].state

    @property
    def cause(self) -> Cause:
        return self.transitions[-1].cause

    @property
    def total_reward(self) -> float:
        return sum(t.reward for t in self.transitions)


# ---------------------------------------------------------------------------
# Geometry predicates.  All segment parameters are in [0, 1] along p0 -> p0+d.


def _seg_rect_entry(px, py, dx, dy, rect: Rect):
    """Earliest parameter at which the segment touches the closed rectangle,
    or None.  Grazing a corner or edge exactly counts as contact."""
    t0, t1 = 0.0, 1.0
    for p, d, lo, hi in ((px, dx, rect.xmin, rect.xmax), (py, dy, rect.ymin, rect.ymax)):
        if d == 0.0:
            if p < lo or p > hi:
                return None
        else:
            ta = (lo - p) / d
            tb = (hi - p) / d
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
            if t0 > t1:
                return None
    return t0


def _seg_bounds_exit(px, py, dx, dy, bounds: Rect):
    """Earliest parameter at which the segment reaches the boundary of
    `bounds`, or None.  Assumes the segment starts inside."""
    if not (bounds.xmin < px < bounds.xmax and bounds.ymin < py < bounds.ymax):
        return 0.0  # already in contact with (or beyond) the boundary
    t = math.inf
    if dx > 0.0:
        t = min(t, (bounds.xmax - px) / dx)
    elif dx < 0.0:
        t = min(t, (bounds.xmin - px) / dx)
    if dy > 0.0:
        t = min(t, (bounds.ymax - py) / dy)
    elif dy < 0.0:
        t = min(t, (bounds.ymin - py) / dy)
    return t if t <= 1.0 else None


def _seg_disc_entry(px, py, dx, dy, cx, cy, radius):
    """Smallest parameter in [0, 1] at which the segment's distance to
    (cx, cy) is <= radius, or None."""
    fx, fy = px - cx, py - cy
    c = fx * fx + fy * fy - radius * radius
    if c <= 0.0:
        return 0.0
    a = dx * dx + dy * dy
    if a == 0.0:
        return None
    b = fx * dx + fy * dy
    disc = b * b - a * c
    if disc < 0.0:
        return None
    t = (-b - math.sqrt(disc)) / a
    return t if 0.0 <= t <= 1.0 else None


def segment_collides(map_spec: MapSpec, p0: Vec2, p1: Vec2) -> bool:
    """True iff the segment p0 -> p1 exits the map bounds or touches any
    obstacle rectangle (boundary contact counts as collision)."""
    dx, dy = p1.x - p0.x, p1.y - p0.y
    if _seg_bounds_exit(p0.x, p0.y, dx, dy, map_spec.bounds) is not None:
        return True
    for rect in map_spec.obstacles:
        if _seg_rect_entry(p0.x, p0.y, dx, dy, rect) is not None:
            return True
    return False


def _collision_param(map_spec: MapSpec, px, py, dx, dy):
    t = _seg_bounds_exit(px, py, dx, dy, map_spec.bounds)
    for rect in map_spec.obstacles:
        tr = _seg_rect_entry(px, py, dx, dy, rect)
        if tr is not None and (t is None or tr < t):
            t = tr
    return t


# ---------------------------------------------------------------------------
# Map loading and validation.


def _require(cond: bool, field_name: str, message: str) -> None:
    if not cond:
        raise MapError(f"{field_name}: {message}")


def _parse_rect(values, field_name: str) -> Rect:
    _require(isinstance(values, (list, tuple)) and len(values) == 4,
             field_name, "expected [xmin, ymin, xmax, ymax]")
    xmin, ymin, xmax, ymax = (float(v) for v in values)
    _require(xmin < xmax and ymin < ymax, field_name, "degenerate rectangle")
    return Rect(xmin, ymin, xmax, ymax)


def _parse_region(doc, field_name: str) -> Region:
    _require(isinstance(doc, dict) and "kind" in doc, field_name, "expected {kind: ...}")
    kind = doc["kind"]
    try:
        if kind == "point":
            return Region("point", point=Vec2(float(doc["x"]), float(doc["y"])))
        if kind == "segment":
            return Region("segment", x0=float(doc["x0"]), x1=float(doc["x1"]),
                          y=float(doc["y"]))
        if kind == "rect":
            return Region("rect", rect=Rect(float(doc["xmin"]), float(doc["ymin"]),
                                            float(doc["xmax"]), float(doc["ymax"])))
    except KeyError as exc:
        raise MapError(f"{field_name}: missing coordinate {exc}") from exc
    raise MapError(f"{field_name}: unknown region kind {kind!r}")


def _strictly_inside(inner: Rect, outer: Rect) -> bool:
    return (outer.xmin < inner.xmin and inner.xmax < outer.xmax
            and outer.ymin < inner.ymin and inner.ymax < outer.ymax)


def validate_map(spec: MapSpec) -> MapSpec:
    b = spec.bounds
    _require(b.xmin < b.xmax and b.ymin < b.ymax, "bounds", "degenerate rectangle")
    for i, rect in enumerate(spec.obstacles):
        _require(_strictly_inside(rect, b), f"obstacles[{i}]",
                 "must lie strictly inside bounds")
    for name, region in (("start", spec.start_region), ("goal", spec.goal_region)):
        rr = region.bounding_rect()
        _require(b.xmin < rr.xmin and rr.xmax < b.xmax
                 and b.ymin < rr.ymin and rr.ymax < b.ymax,
                 name, "must lie strictly inside bounds")
        for i, rect in enumerate(spec.obstacles):
            _require(not rect.overlaps(rr), name,
                     f"must be disjoint from obstacles[{i}]")
    _require(spec.goal_radius > 0.0, "goal_radius", "must be positive")
    _require(spec.max_steps >= 1, "max_steps", "must be >= 1")
    return spec


def map_from_dict(doc: dict, name: str = "") -> MapSpec:
    if not isinstance(doc, dict):
        raise MapError("document: expected a JSON object")
    for key in ("bounds", "start", "goal"):
        _require(key in doc, key, "missing required field")
    spec = MapSpec(
        name=name or doc.get("name", ""),
        bounds=_parse_rect(doc["bounds"], "bounds"),
        obstacles=tuple(_parse_rect(r, f"obstacles[{i}]")
                        for i, r in enumerate(doc.get("obstacles", []))),
        start_region=_parse_region(doc["start"], "start"),
        goal_region=_parse_region(doc["goal"], "goal"),
        goal_radius=float(doc.get("goal_radius", 1.0)),
        max_steps=int(doc.get("max_steps", 200)),
    )
    return validate_map(spec)


def map_to_dict(spec: MapSpec) -> dict:
    def region_doc(region: Region) -> dict:
        if region.kind == "point":
            return {"kind": "point", "x": region.point.x, "y": region.point.y}
        if region.kind == "segment":
            return {"kind": "segment", "x0": region.x0, "x1": region.x1, "y": region.y}
        r = region.rect
        return {"kind": "rect", "xmin": r.xmin, "ymin": r.ymin,
                "xmax": r.xmax, "ymax": r.ymax}

    return {
        "name": spec.name,
        "bounds": list(spec.bounds),
        "obstacles": [list(r) for r in spec.obstacles],
        "start": region_doc(spec.start_region),
        "goal": region_doc(spec.goal_region),
        "goal_radius": spec.goal_radius,
        "max_steps": spec.max_steps,
    }


def load_map(path) -> MapSpec:
    """Load and validate a map document (JSON, see map_to_dict for schema)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise MapError(f"cannot read map file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MapError(f"cannot parse map file {path}: {exc}") from exc
    return map_from_dict(doc, name=os.path.basename(str(path)))


# ---------------------------------------------------------------------------
# Dynamics.


def _clamp(v: float) -> float:
    if math.isnan(v):
        return 0.0
    return -1.0 if v < -1.0 else 1.0 if v > 1.0 else v


def reset(map_spec: MapSpec, rng, start_override: Optional[Vec2] = None,
          goal_override: Optional[Vec2] = None) -> State:
    """Sample a fresh initial state.  Overrides bypass sampling but must lie
    inside the respective region (tolerance 1e-6) and are taken verbatim."""
    if start_override is not None:
        if not map_spec.start_region.contains(start_override):
            raise ValueError(f"start_override {tuple(start_override)} outside start region")
        start = Vec2(*start_override)
    else:
        start = map_spec.start_region.sample(rng)
    if goal_override is not None:
        if not map_spec.goal_region.contains(goal_override):
            raise ValueError(f"goal_override {tuple(goal_override)} outside goal region")
        goal = Vec2(*goal_override)
    else:
        goal = map_spec.goal_region.sample(rng)
    return State(pos=start, goal=goal)


def step(map_spec: MapSpec, state: State, action: Action, step_count: int) -> StepResult:
    """Advance one step.  Earliest event along the motion segment wins;
    on an exact tie between collision and goal the goal is granted."""
    dx = _clamp(action.vx) * DT
    dy = _clamp(action.vy) * DT
    px, py = state.pos

    t_col = _collision_param(map_spec, px, py, dx, dy)
    t_goal = _seg_disc_entry(px, py, dx, dy, state.goal.x, state.goal.y,
                             map_spec.goal_radius)

    if t_goal is not None and (t_col is None or t_goal <= t_col):
        pos = Vec2(px + t_goal * dx, py + t_goal * dy)
        return StepResult(State(pos, state.goal), GOAL_REWARD, True, Cause.GOAL)
    if t_col is not None:
        pos = Vec2(px + t_col * dx, py + t_col * dy)
        return StepResult(State(pos, state.goal), COLLISION_REWARD, True, Cause.COLLISION)

    next_state = State(Vec2(px + dx, py + dy), state.goal)
    if step_count + 1 >= map_spec.max_steps:
        return StepResult(next_state, STEP_REWARD, True, Cause.TIMEOUT)
    return StepResult(next_state, STEP_REWARD, False, Cause.NONE)


Policy = Callable[[State], Action]


def rollout(map_spec: MapSpec, policy: Policy, rng,
            start_override: Optional[Vec2] = None,
            goal_override: Optional[Vec2] = None,
            source: Source = Source.AGENT) -> Trajectory:
    """Reset and run `policy` until the episode terminates."""
    state = reset(map_spec, rng, start_override=start_override,
                  goal_override=goal_override)
    transitions = []
    for step_count in range(map_spec.max_steps):
        action = policy(state)
        result = step(map_spec, state, action, step_count)
        transitions.append(Transition(state, action, result.reward,
                                      result.next_state, result.done, result.cause))
        state = result.next_state
        if result.done:
            break
    return Trajectory(transitions, source=source)
