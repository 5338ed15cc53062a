"""Simulated expert demonstrator: an RRT* planner answering feature-based
queries with collision-free, near-optimal episodic demonstrations.

A demonstration starts exactly (bit-equal) at the queried initial state:
the planner roots its tree at the query and the resulting polyline is
walked through the real environment step function, recording true rewards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import envsim
from .envsim import Action, MapSpec, Source, Trajectory, Vec2, segment_collides
from .strategy import Feature


class PlanningError(RuntimeError):
    """No path found within the iteration budget."""


class DemoExecutionError(RuntimeError):
    """A planned demo failed to reach the goal when executed (defect)."""


@dataclass(frozen=True)
class RrtStarConfig:
    max_iterations: int = 5000
    steer_step: float = 1.0
    neighbor_radius_const: float = 30.0
    goal_bias: float = 0.1
    goal_tolerance: Optional[float] = None  # None: use the map's goal radius
    refine_iterations: int = 300  # budget spent improving after the first hit
    smooth: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.steer_step <= 0.0:
            raise ValueError("steer_step must be positive")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError("goal_bias must be in [0, 1]")


class PlanTree:
    """Growable tree: root cost 0, cost(child) = cost(parent) + distance."""

    def __init__(self, root: Vec2, capacity: int):
        self.positions = np.empty((capacity, 2))
        self.positions[0] = (root.x, root.y)
        self.costs = np.empty(capacity)
        self.costs[0] = 0.0
        self.parents = [-1]
        self.children: list[list[int]] = [[]]
        self.size = 1

    def node_pos(self, i: int) -> Vec2:
        return Vec2(self.positions[i, 0], self.positions[i, 1])

    def add(self, pos: Vec2, parent: int, cost: float) -> int:
        i = self.size
        self.positions[i] = (pos.x, pos.y)
        self.costs[i] = cost
        self.parents.append(parent)
        self.children[parent].append(i)
        self.children.append([])
        self.size = i + 1
        return i

    def reparent(self, node: int, new_parent: int, new_cost: float) -> None:
        """Attach `node` under `new_parent` and push the cost change down
        the whole subtree."""
        delta = new_cost - self.costs[node]
        self.children[self.parents[node]].remove(node)
        self.parents[node] = new_parent
        self.children[new_parent].append(node)
        stack = [node]
        while stack:
            j = stack.pop()
            self.costs[j] += delta
            stack.extend(self.children[j])

    def path_to_root(self, node: int) -> list[Vec2]:
        out = []
        while node != -1:
            out.append(self.node_pos(node))
            node = self.parents[node]
        out.reverse()
        return out


def _free_point(map_spec: MapSpec, p: Vec2) -> bool:
    return not segment_collides(map_spec, p, p)


def grow_tree(map_spec: MapSpec, start: Vec2, goal: Vec2,
              cfg: RrtStarConfig, rng) -> tuple[PlanTree, list[int]]:
    """Run RRT* (sample, steer, choose-parent, rewire) from `start`; returns
    the tree and the indices of nodes within goal tolerance."""
    tol = cfg.goal_tolerance if cfg.goal_tolerance is not None else map_spec.goal_radius
    b = map_spec.bounds
    tree = PlanTree(start, cfg.max_iterations + 1)
    goal_nodes: list[int] = []
    if math.hypot(start.x - goal.x, start.y - goal.y) <= tol:
        return tree, [0]
    first_hit: Optional[int] = None
    radius_cap = 4.0 * cfg.steer_step

    for it in range(cfg.max_iterations):
        if rng.random() < cfg.goal_bias:
            sx, sy = goal.x, goal.y
        else:
            sx = rng.uniform(b.xmin, b.xmax)
            sy = rng.uniform(b.ymin, b.ymax)

        n = tree.size
        xs = tree.positions[:n, 0]
        ys = tree.positions[:n, 1]
        d2 = (xs - sx) ** 2 + (ys - sy) ** 2
        nearest = int(np.argmin(d2))
        dist = math.sqrt(d2[nearest])
        if dist < 1e-12:
            continue
        npos = tree.node_pos(nearest)
        scale = min(cfg.steer_step, dist) / dist
        new = Vec2(npos.x + (sx - npos.x) * scale, npos.y + (sy - npos.y) * scale)
        if segment_collides(map_spec, npos, new):
            continue

        radius = min(radius_cap,
                     cfg.neighbor_radius_const * math.sqrt(math.log(n + 1) / (n + 1)))
        nd2 = (xs - new.x) ** 2 + (ys - new.y) ** 2
        near = np.flatnonzero(nd2 <= radius * radius)

        # choose-parent: cheapest collision-free connection over the near set
        best_parent = nearest
        best_cost = tree.costs[nearest] + min(cfg.steer_step, dist)
        if near.size:
            cand_costs = tree.costs[near] + np.sqrt(nd2[near])
            for j in np.argsort(cand_costs):
                cand = int(near[j])
                if cand_costs[j] >= best_cost:
                    break
                if not segment_collides(map_spec, tree.node_pos(cand), new):
                    best_parent, best_cost = cand, float(cand_costs[j])
                    break
        node = tree.add(new, best_parent, best_cost)

        # rewire the near set through the new node
        for j in near:
            j = int(j)
            cost_via_new = best_cost + math.sqrt(nd2[j])
            if cost_via_new < tree.costs[j] - 1e-12 and not segment_collides(
                    map_spec, new, tree.node_pos(j)):
                tree.reparent(j, node, cost_via_new)

        if (new.x - goal.x) ** 2 + (new.y - goal.y) ** 2 <= tol * tol:
            goal_nodes.append(node)
            if first_hit is None:
                first_hit = it
        if first_hit is not None and it >= first_hit + cfg.refine_iterations:
            break
    return tree, goal_nodes


def smooth_path(map_spec: MapSpec, path: list[Vec2]) -> list[Vec2]:
    """Greedy shortcutting: from each kept waypoint, jump to the farthest
    later waypoint reachable by a collision-free chord."""
    if len(path) <= 2:
        return list(path)
    out = [path[0]]
    i = 0
    while i < len(path) - 1:
        j = len(path) - 1
        while j > i + 1 and segment_collides(map_spec, path[i], path[j]):
            j -= 1
        out.append(path[j])
        i = j
    return out


def plan(map_spec: MapSpec, start: Vec2, goal: Vec2,
         cfg: RrtStarConfig, rng) -> list[Vec2]:
    """Collision-free polyline from `start` to within goal tolerance of
    `goal`; lowest-cost goal-reaching branch of the grown tree."""
    for name, p in (("start", start), ("goal", goal)):
        if not _free_point(map_spec, p):
            raise ValueError(f"{name} {tuple(p)} is not in free space")
    tree, goal_nodes = grow_tree(map_spec, start, goal, cfg, rng)
    if not goal_nodes:
        raise PlanningError(
            f"no path from {tuple(start)} to {tuple(goal)} within "
            f"{cfg.max_iterations} iterations")
    best = min(goal_nodes, key=lambda i: tree.costs[i])
    path = tree.path_to_root(best)
    if cfg.smooth:
        path = smooth_path(map_spec, path)
    return path


def path_to_demo(map_spec: MapSpec, path: list[Vec2], goal: Vec2) -> Trajectory:
    """Walk the polyline with unit-capped steps through the real environment,
    recording true rewards.  The demo must end with cause=Goal."""
    state = envsim.reset(map_spec, rng=None, start_override=path[0],
                         goal_override=goal)
    transitions = []
    k = 1
    for step_count in range(map_spec.max_steps):
        target = path[k] if k < len(path) else goal
        ddx, ddy = target.x - state.pos.x, target.y - state.pos.y
        d = math.hypot(ddx, ddy)
        if d <= 1.0:
            action = Action(ddx, ddy)
            if k < len(path):
                k += 1
        else:
            action = Action(ddx / d, ddy / d)
        result = envsim.step(map_spec, state, action, step_count)
        transitions.append(envsim.Transition(state, action, result.reward,
                                             result.next_state, result.done,
                                             result.cause))
        state = result.next_state
        if result.done:
            break
    traj = Trajectory(transitions, source=Source.ORACLE)
    if traj.cause is not envsim.Cause.GOAL:
        raise DemoExecutionError(
            f"planned demo terminated with {traj.cause.value} instead of goal")
    return traj


class OracleDemoSource:
    """DemoSource backed by the planner; retries planning on up to three
    random streams before giving up."""

    def __init__(self, map_spec: MapSpec, cfg: RrtStarConfig, rng,
                 retries: int = 3):
        self.map_spec = map_spec
        self.cfg = cfg
        self.rng = rng
        self.retries = retries

    def provide_demo(self, query: Feature) -> Trajectory:
        if not self.map_spec.start_region.contains(query.pos):
            raise ValueError(f"query start {tuple(query.pos)} outside start region")
        if query.goal is not None:
            if not self.map_spec.goal_region.contains(query.goal):
                raise ValueError(f"query goal {tuple(query.goal)} outside goal region")
            goal = query.goal
        else:
            if self.map_spec.random_goal:
                raise ValueError("random-goal task requires a goal in the query")
            goal = self.map_spec.goal_region.point
        last_error: Exception | None = None
        for _ in range(self.retries):
            try:
                path = plan(self.map_spec, query.pos, goal, self.cfg, self.rng)
                break
            except PlanningError as exc:
                last_error = exc
        else:
            raise PlanningError(f"planning failed after {self.retries} attempts: "
                                f"{last_error}")
        demo = path_to_demo(self.map_spec, path, goal)
        if demo.start_state.pos != query.pos:
            raise DemoExecutionError("demo start does not equal the queried feature")
        return demo
