import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from early.envsim import (Action, Cause, MapError, State, Vec2, load_map,
                          map_from_dict, map_to_dict, reset, rollout,
                          segment_collides, step)

from conftest import make_rng


# ---------------------------------------------------------------------------
# map loading


def test_load_nav1_shape(nav1):
    assert nav1.goal_region.kind == "point"
    assert nav1.start_region.kind == "segment"
    assert nav1.start_region.y == 1.0
    assert len(nav1.obstacles) == 1
    assert nav1.goal_radius == 1.0
    assert nav1.max_steps == 200
    assert not nav1.random_goal


def test_map_round_trip(nav2):
    again = map_from_dict(map_to_dict(nav2), name=nav2.name)
    assert again == nav2


def test_obstacle_outside_bounds_rejected():
    doc = {
        "bounds": [0, 0, 10, 10],
        "obstacles": [[8, 8, 12, 9]],
        "start": {"kind": "point", "x": 1, "y": 1},
        "goal": {"kind": "point", "x": 9, "y": 9},
    }
    with pytest.raises(MapError, match=r"obstacles\[0\]"):
        map_from_dict(doc)


def test_empty_obstacle_list_is_valid(open_map):
    assert open_map.obstacles == ()


def test_region_overlapping_obstacle_rejected():
    doc = {
        "bounds": [0, 0, 10, 10],
        "obstacles": [[4, 4, 6, 6]],
        "start": {"kind": "segment", "x0": 1, "x1": 5, "y": 5},
        "goal": {"kind": "point", "x": 9, "y": 9},
    }
    with pytest.raises(MapError, match="start"):
        map_from_dict(doc)


def test_degenerate_bounds_rejected():
    with pytest.raises(MapError, match="bounds"):
        map_from_dict({"bounds": [0, 0, 0, 10],
                       "start": {"kind": "point", "x": 1, "y": 1},
                       "goal": {"kind": "point", "x": 2, "y": 2}})


def test_load_map_parse_error(tmp_path):
    path = tmp_path / "bad"
    path.write_text("{not json")
    with pytest.raises(MapError, match="parse"):
        load_map(path)


# ---------------------------------------------------------------------------
# reset


def test_nav1_goal_is_fixed_point(nav1):
    rng = make_rng(3)
    goals = {reset(nav1, rng).goal for _ in range(10)}
    assert goals == {Vec2(10.0, 18.0)}


def test_reset_start_override_is_bit_exact(nav1):
    override = Vec2(3.0 + 1e-13, 1.0)
    state = reset(nav1, make_rng(0), start_override=override)
    assert state.pos == override
    assert state.pos.x == override.x  # no arithmetic applied


def test_reset_override_outside_region_raises(nav1):
    with pytest.raises(ValueError, match="outside start region"):
        reset(nav1, make_rng(0), start_override=Vec2(3.0, 5.0))


def test_reset_same_seed_identical(nav2):
    a = reset(nav2, make_rng(11))
    b = reset(nav2, make_rng(11))
    assert a == b


def test_reset_samples_inside_regions(nav3):
    rng = make_rng(5)
    for _ in range(50):
        s = reset(nav3, rng)
        assert nav3.start_region.contains(s.pos)
        assert nav3.goal_region.contains(s.goal)


# ---------------------------------------------------------------------------
# step


def test_plain_step_dynamics(open_map):
    state = State(Vec2(5.0, 5.0), Vec2(15.0, 15.0))
    result = step(open_map, state, Action(1.0, 0.0), 0)
    assert result.next_state.pos == Vec2(6.0, 5.0)
    assert result.reward == -1.0
    assert not result.done
    assert result.cause is Cause.NONE


def test_goal_by_closest_approach(open_map):
    state = State(Vec2(14.5, 15.0), Vec2(15.0, 15.0))
    result = step(open_map, state, Action(1.0, 0.0), 0)
    assert result.done and result.cause is Cause.GOAL
    assert result.reward == 1000.0


def test_goal_cannot_tunnel_past_disc(open_map):
    # fast diagonal step passing within the radius but ending outside it
    state = State(Vec2(14.0, 14.2), Vec2(15.0, 15.0))
    result = step(open_map, state, Action(1.0, 1.0), 0)
    assert result.cause is Cause.GOAL


def test_collision_with_obstacle_edge(nav1):
    state = State(Vec2(10.0, 7.5), Vec2(10.0, 18.0))
    result = step(nav1, state, Action(0.0, 1.0), 0)
    assert result.done and result.cause is Cause.COLLISION
    assert result.reward == -1000.0
    # stops at the contact point
    assert result.next_state.pos.y == pytest.approx(8.0)


def test_collision_with_boundary(open_map):
    state = State(Vec2(19.5, 10.0), Vec2(5.0, 5.0))
    result = step(open_map, state, Action(1.0, 0.0), 0)
    assert result.cause is Cause.COLLISION


def test_action_clamped(open_map):
    state = State(Vec2(5.0, 5.0), Vec2(15.0, 15.0))
    result = step(open_map, state, Action(3.0, -7.0), 0)
    assert result.next_state.pos == Vec2(6.0, 4.0)


def test_timeout_at_max_steps(open_map):
    state = State(Vec2(5.0, 5.0), Vec2(15.0, 15.0))
    result = step(open_map, state, Action(0.0, 0.0), open_map.max_steps - 1)
    assert result.done and result.cause is Cause.TIMEOUT
    assert result.reward == -1.0


def test_goal_beats_timeout_on_final_step(open_map):
    state = State(Vec2(14.5, 15.0), Vec2(15.0, 15.0))
    result = step(open_map, state, Action(1.0, 0.0), open_map.max_steps - 1)
    assert result.cause is Cause.GOAL


def test_earliest_event_wins(nav1):
    # both events inside one step: goal disc entry at t=0.3, obstacle at t=0.7
    state = State(Vec2(10.0, 7.3), Vec2(10.0, 8.6))
    result = step(nav1, state, Action(0.0, 1.0), 0)
    assert result.cause is Cause.GOAL
    # and the other way around: obstacle first
    state = State(Vec2(10.0, 7.3), Vec2(10.0, 9.8))
    result = step(nav1, state, Action(0.0, 1.0), 0)
    assert result.cause is Cause.COLLISION


# ---------------------------------------------------------------------------
# segment_collides


def test_point_segment_in_free_space(nav1):
    assert not segment_collides(nav1, Vec2(3.0, 3.0), Vec2(3.0, 3.0))


def test_endpoint_inside_obstacle(nav1):
    assert segment_collides(nav1, Vec2(10.0, 10.0), Vec2(10.0, 10.0))
    assert segment_collides(nav1, Vec2(3.0, 3.0), Vec2(10.0, 10.0))


def test_grazing_corner_counts(nav1):
    # obstacle corner at (7.5, 8.0); the diagonal x - y = -0.5 passes through it
    assert segment_collides(nav1, Vec2(6.5, 7.0), Vec2(8.5, 9.0))


def test_touching_edge_counts(nav1):
    assert segment_collides(nav1, Vec2(5.0, 8.0), Vec2(7.5, 8.0))


def test_crossing_through_obstacle(nav1):
    assert segment_collides(nav1, Vec2(5.0, 10.0), Vec2(15.0, 10.0))


def test_bounds_contact_counts(nav1):
    assert segment_collides(nav1, Vec2(1.0, 1.0), Vec2(0.0, 1.0))
    assert not segment_collides(nav1, Vec2(1.0, 1.0), Vec2(0.5, 1.0))


# ---------------------------------------------------------------------------
# rollout


def test_rollout_constant_zero_action_times_out(nav1):
    traj = rollout(nav1, lambda s: Action(0.0, 0.0), make_rng(0))
    assert len(traj) == nav1.max_steps
    assert traj.cause is Cause.TIMEOUT
    assert traj.total_reward == -float(nav1.max_steps)


def test_rollout_deterministic(nav1):
    policy = lambda s: Action(0.3, 0.9)  # noqa: E731
    a = rollout(nav1, policy, make_rng(4))
    b = rollout(nav1, policy, make_rng(4))
    assert a.transitions == b.transitions


def test_rollout_oracle_policy_reaches_goal(nav1):
    # replay a planned path as a reactive policy
    from early.oracle import OracleDemoSource, RrtStarConfig
    from early.strategy import Feature
    source = OracleDemoSource(nav1, RrtStarConfig(), make_rng(1))
    demo = source.provide_demo(Feature(Vec2(4.0, 1.0)))
    actions = iter([t.action for t in demo.transitions])
    traj = rollout(nav1, lambda s: next(actions), make_rng(0),
                   start_override=Vec2(4.0, 1.0))
    assert traj.cause is Cause.GOAL


def _random_policy(rng):
    def policy(state):
        return Action(float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)))
    return policy


@pytest.mark.parametrize("seed", range(8))
def test_reward_accounting_invariant(nav1, seed):
    rng = make_rng(seed)
    traj = rollout(nav1, _random_policy(rng), rng)
    expected = -len(traj)
    if traj.cause is Cause.GOAL:
        expected += 1001
    elif traj.cause is Cause.COLLISION:
        expected -= 999
    assert traj.total_reward == expected


@pytest.mark.parametrize("seed", range(8))
def test_trajectory_invariants(nav2, seed):
    rng = make_rng(100 + seed)
    traj = rollout(nav2, _random_policy(rng), rng)
    assert 1 <= len(traj) <= nav2.max_steps
    for i, t in enumerate(traj.transitions):
        terminal = i == len(traj) - 1
        assert t.done == (t.cause is not Cause.NONE)
        if not terminal:
            assert not t.done
            nxt = traj.transitions[i + 1]
            assert t.next_state == nxt.state
            # non-terminal next states are collision-free and inside bounds
            assert not segment_collides(nav2, t.next_state.pos, t.next_state.pos)
    assert traj.transitions[-1].done


@given(px=st.floats(1.0, 19.0), py=st.floats(1.0, 19.0),
       vx=st.floats(-1.0, 1.0), vy=st.floats(-1.0, 1.0))
@settings(max_examples=200, deadline=None)
def test_step_never_leaves_bounds_without_terminating(open_map, px, py, vx, vy):
    state = State(Vec2(px, py), Vec2(0.5, 0.5))
    result = step(open_map, state, Action(vx, vy), 0)
    p = result.next_state.pos
    b = open_map.bounds
    if not result.done:
        assert b.xmin < p.x < b.xmax and b.ymin < p.y < b.ymax
    else:
        assert b.xmin <= p.x <= b.xmax and b.ymin <= p.y <= b.ymax
