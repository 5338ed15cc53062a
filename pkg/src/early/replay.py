"""Dual replay buffers: capped FIFO for agent roll-outs, unbounded storage
for expert demonstrations, with half-and-half balanced sampling."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .envsim import Action, State, Trajectory, Transition

DEFAULT_CAPACITY = 100_000


class RecordSource(enum.Enum):
    AGENT = 0
    DEMO = 1


class TransitionRecord(NamedTuple):
    state: State
    action: Action
    reward: float  # raw, unscaled env reward
    next_state: State
    done: bool
    source: RecordSource


def record_from_transition(t: Transition, source: RecordSource) -> TransitionRecord:
    return TransitionRecord(t.state, t.action, t.reward, t.next_state, t.done, source)


@dataclass
class Batch:
    states: np.ndarray       # (n, 4) raw observations
    actions: np.ndarray      # (n, 2)
    rewards: np.ndarray      # (n,) raw rewards
    next_states: np.ndarray  # (n, 4)
    dones: np.ndarray        # (n,) 0.0/1.0
    sources: np.ndarray      # (n,) RecordSource values

    def __len__(self) -> int:
        return len(self.states)


class _Store:
    """Struct-of-arrays transition storage with optional FIFO eviction."""

    def __init__(self, capacity: int | None, initial: int = 1024):
        self.capacity = capacity
        size = initial if capacity is None else min(initial, capacity)
        self._alloc(max(size, 1))
        self.count = 0      # live records
        self.head = 0       # ring index of the oldest record (capped mode)
        self.evictions = 0

    def _alloc(self, size: int) -> None:
        self.states = np.empty((size, 4))
        self.actions = np.empty((size, 2))
        self.rewards = np.empty(size)
        self.next_states = np.empty((size, 4))
        self.dones = np.empty(size)

    def _grow(self) -> None:
        old = (self.states, self.actions, self.rewards, self.next_states, self.dones)
        size = len(self.rewards) * 2
        if self.capacity is not None:
            size = min(size, self.capacity)
        self._alloc(size)
        n = self.count
        for new, prev in zip((self.states, self.actions, self.rewards,
                              self.next_states, self.dones), old):
            new[:n] = prev[:n]

    def push(self, rec: TransitionRecord) -> None:
        if self.count == len(self.rewards) and (
                self.capacity is None or self.count < self.capacity):
            self._grow()
        if self.capacity is not None and self.count == self.capacity:
            idx = self.head
            self.head = (self.head + 1) % self.capacity
            self.evictions += 1
        else:
            idx = (self.head + self.count) % len(self.rewards)
            self.count += 1
        self.states[idx] = rec.state.as_tuple()
        self.actions[idx] = (rec.action.vx, rec.action.vy)
        self.rewards[idx] = rec.reward
        self.next_states[idx] = rec.next_state.as_tuple()
        self.dones[idx] = 1.0 if rec.done else 0.0

    def gather(self, idx: np.ndarray):
        if self.capacity is not None:
            idx = (self.head + idx) % len(self.rewards)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx], self.dones[idx])


class DualReplayBuffer:
    """Agent roll-outs go to a capacity-capped FIFO; demonstration records
    are kept for the whole run.  Single-threaded ownership."""

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._agent = _Store(capacity)
        self._demo = _Store(None)
        self.demo_episodes = 0

    def push(self, record: TransitionRecord) -> None:
        if record.source is RecordSource.DEMO:
            self._demo.push(record)
        else:
            self._agent.push(record)

    def push_demo_trajectory(self, trajectory: Trajectory) -> None:
        for t in trajectory.transitions:
            self.push(record_from_transition(t, RecordSource.DEMO))
        self.demo_episodes += 1

    def stats(self) -> tuple[int, int, int]:
        """(agent_count, demo_count, evictions)."""
        return self._agent.count, self._demo.count, self._agent.evictions

    def agent_records_oldest_first(self) -> Batch:
        idx = np.arange(self._agent.count)
        return Batch(*self._agent.gather(idx),
                     sources=np.full(self._agent.count, RecordSource.AGENT.value,
                                     dtype=np.int8))

    def sample_balanced(self, batch_size: int, rng) -> Batch:
        """Uniform-with-replacement sampling: half from each buffer when
        demonstrations exist, all-agent before the first demo arrives."""
        if self._agent.count == 0:
            raise ValueError("cannot sample: agent buffer is empty")
        if batch_size % 2 != 0:
            raise ValueError("batch_size must be even")
        if self._demo.count > 0:
            half = batch_size // 2
            a_idx = rng.integers(0, self._agent.count, size=half)
            d_idx = rng.integers(0, self._demo.count, size=half)
            a = self._agent.gather(a_idx)
            d = self._demo.gather(d_idx)
            parts = [np.concatenate([x, y]) for x, y in zip(a, d)]
            sources = np.concatenate([
                np.full(half, RecordSource.AGENT.value, dtype=np.int8),
                np.full(half, RecordSource.DEMO.value, dtype=np.int8)])
            return Batch(*parts, sources=sources)
        a_idx = rng.integers(0, self._agent.count, size=batch_size)
        return Batch(*self._agent.gather(a_idx),
                     sources=np.full(batch_size, RecordSource.AGENT.value,
                                     dtype=np.int8))
