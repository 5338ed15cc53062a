import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from early.envsim import Action, State, Vec2
from early.replay import DualReplayBuffer, RecordSource, TransitionRecord

from conftest import make_rng


def rec(i, source=RecordSource.AGENT, done=False):
    s = State(Vec2(float(i), 1.0), Vec2(10.0, 18.0))
    s2 = State(Vec2(float(i) + 0.5, 1.5), Vec2(10.0, 18.0))
    return TransitionRecord(s, Action(0.1, 0.2), -1.0, s2, done, source)


def test_fresh_buffer_stats():
    assert DualReplayBuffer(10).stats() == (0, 0, 0)


def test_stats_after_pushes():
    buf = DualReplayBuffer(10)
    for i in range(3):
        buf.push(rec(i))
    for i in range(2):
        buf.push(rec(i, RecordSource.DEMO))
    assert buf.stats() == (3, 2, 0)


def test_fifo_eviction_order():
    buf = DualReplayBuffer(2)
    for i in range(3):
        buf.push(rec(i))
    agent_count, demo_count, evictions = buf.stats()
    assert (agent_count, evictions) == (2, 1)
    kept = buf.agent_records_oldest_first()
    assert list(kept.states[:, 0]) == [1.0, 2.0]  # record 0 evicted


def test_demo_records_never_evicted():
    buf = DualReplayBuffer(2)
    for i in range(1000):
        buf.push(rec(i, RecordSource.DEMO))
    assert buf.stats() == (0, 1000, 0)


def test_pushes_never_cross_buffers():
    buf = DualReplayBuffer(4)
    for i in range(3):
        buf.push(rec(i, RecordSource.AGENT))
        buf.push(rec(100 + i, RecordSource.DEMO))
    agent_count, demo_count, _ = buf.stats()
    assert (agent_count, demo_count) == (3, 3)
    batch = buf.sample_balanced(200, make_rng(0))
    agent_xs = batch.states[batch.sources == RecordSource.AGENT.value][:, 0]
    demo_xs = batch.states[batch.sources == RecordSource.DEMO.value][:, 0]
    assert set(agent_xs) <= {0.0, 1.0, 2.0}
    assert set(demo_xs) <= {100.0, 101.0, 102.0}


def test_balanced_composition():
    buf = DualReplayBuffer(100)
    for i in range(10):
        buf.push(rec(i))
    for i in range(3):
        buf.push(rec(i, RecordSource.DEMO))
    batch = buf.sample_balanced(64, make_rng(1))
    assert len(batch) == 64
    assert int(np.sum(batch.sources == RecordSource.DEMO.value)) == 32


def test_all_agent_before_first_demo():
    buf = DualReplayBuffer(100)
    for i in range(5):
        buf.push(rec(i))
    batch = buf.sample_balanced(64, make_rng(2))
    assert len(batch) == 64
    assert np.all(batch.sources == RecordSource.AGENT.value)


def test_single_record_each_side():
    buf = DualReplayBuffer(100)
    buf.push(rec(7))
    buf.push(rec(42, RecordSource.DEMO))
    batch = buf.sample_balanced(2, make_rng(3))
    xs = sorted(batch.states[:, 0])
    assert xs == [7.0, 42.0]


def test_empty_agent_buffer_raises():
    buf = DualReplayBuffer(10)
    buf.push(rec(0, RecordSource.DEMO))
    with pytest.raises(ValueError, match="agent buffer"):
        buf.sample_balanced(4, make_rng(0))


def test_odd_batch_size_rejected():
    buf = DualReplayBuffer(10)
    buf.push(rec(0))
    with pytest.raises(ValueError, match="even"):
        buf.sample_balanced(3, make_rng(0))


def test_batch_field_round_trip():
    buf = DualReplayBuffer(10)
    buf.push(rec(5, done=True))
    batch = buf.sample_balanced(2, make_rng(0))
    assert np.all(batch.states[:, 0] == 5.0)
    assert np.all(batch.actions == [0.1, 0.2])
    assert np.all(batch.rewards == -1.0)
    assert np.all(batch.dones == 1.0)
    assert np.all(batch.next_states[:, 1] == 1.5)


@given(capacity=st.integers(1, 20), n_agent=st.integers(0, 60),
       n_demo=st.integers(0, 30))
@settings(max_examples=100, deadline=None)
def test_counters_and_eviction_property(capacity, n_agent, n_demo):
    buf = DualReplayBuffer(capacity)
    for i in range(n_agent):
        buf.push(rec(i))
    for i in range(n_demo):
        buf.push(rec(1000 + i, RecordSource.DEMO))
    agent_count, demo_count, evictions = buf.stats()
    assert agent_count == min(n_agent, capacity)
    assert demo_count == n_demo
    assert evictions == max(0, n_agent - capacity)
    if agent_count:
        kept = buf.agent_records_oldest_first().states[:, 0]
        assert list(kept) == [float(i) for i in range(n_agent - agent_count,
                                                      n_agent)]


@given(n_agent=st.integers(1, 40), n_demo=st.integers(0, 40),
       batch=st.sampled_from([2, 8, 64]), seed=st.integers(0, 10))
@settings(max_examples=100, deadline=None)
def test_balanced_split_property(n_agent, n_demo, batch, seed):
    buf = DualReplayBuffer(100)
    for i in range(n_agent):
        buf.push(rec(i))
    for i in range(n_demo):
        buf.push(rec(1000 + i, RecordSource.DEMO))
    out = buf.sample_balanced(batch, make_rng(seed))
    n_demo_sampled = int(np.sum(out.sources == RecordSource.DEMO.value))
    assert n_demo_sampled == (batch // 2 if n_demo else 0)


def test_demo_persistence_under_agent_churn():
    buf = DualReplayBuffer(4)
    buf.push(rec(0, RecordSource.DEMO))
    for i in range(50):
        buf.push(rec(i))
    batch = buf.sample_balanced(10, make_rng(1))
    demo_rows = batch.states[batch.sources == RecordSource.DEMO.value]
    assert len(demo_rows) == 5
    assert np.all(demo_rows[:, 0] == 0.0)
