"""Finite FIFO replay of joint transitions with uniform sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class BufferNotReady(RuntimeError):
    """Fewer stored transitions than the requested minibatch."""


@dataclass
class Transition:
    states: np.ndarray  # (N, D)
    actions: np.ndarray  # (N, K) one-hot
    rewards: np.ndarray  # (N,)
    next_states: np.ndarray  # (N, D)
    neighbors: np.ndarray | None = None  # (N, L) neighbor index in force when recorded

    def __post_init__(self):
        n = len(self.states)
        if not (len(self.actions) == len(self.rewards) == len(self.next_states) == n):
            raise ValueError("transition blocks disagree on the number of agents")
        if n and not np.allclose(self.actions.sum(axis=1), 1.0):
            raise ValueError("each action must be one-hot")


@dataclass
class Batch:
    states: np.ndarray  # (B, N, D)
    actions: np.ndarray  # (B, N, K)
    rewards: np.ndarray  # (B, N)
    next_states: np.ndarray  # (B, N, D)
    neighbors: np.ndarray  # (B, N, L)

    def __len__(self):
        return len(self.rewards)


class ReplayBuffer:
    def __init__(self, capacity: int, n_agents: int, obs_dim: int, n_actions: int, n_neighbors: int = 1):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, n_agents, obs_dim))
        self.actions = np.zeros((capacity, n_agents, n_actions))
        self.rewards = np.zeros((capacity, n_agents))
        self.next_states = np.zeros((capacity, n_agents, obs_dim))
        self.neighbors = np.zeros((capacity, n_agents, n_neighbors), dtype=np.int64)
        self._default_nb = np.tile(np.arange(n_agents)[:, None], (1, n_neighbors))
        self.n_inserted = 0

    def __len__(self):
        return min(self.n_inserted, self.capacity)

    def push(self, t: Transition) -> None:
        slot = self.n_inserted % self.capacity
        self.states[slot] = t.states
        self.actions[slot] = t.actions
        self.rewards[slot] = t.rewards
        self.next_states[slot] = t.next_states
        self.neighbors[slot] = self._default_nb if t.neighbors is None else t.neighbors
        self.n_inserted += 1

    def get(self, idx) -> Batch:
        idx = np.atleast_1d(idx)
        return Batch(
            self.states[idx], self.actions[idx], self.rewards[idx],
            self.next_states[idx], self.neighbors[idx],
        )

    def oldest_index(self) -> int:
        return 0 if self.n_inserted <= self.capacity else self.n_inserted % self.capacity

    def ready(self, batch_size: int) -> bool:
        return len(self) >= batch_size

    def sample(self, batch_size: int, stream: np.random.Generator) -> Batch:
        """Uniform sampling with replacement."""
        if not self.ready(batch_size):
            raise BufferNotReady(f"{len(self)} stored, {batch_size} requested")
        return self.get(stream.integers(0, len(self), size=batch_size))


def push_transition(buffer: ReplayBuffer, t: Transition) -> ReplayBuffer:
    buffer.push(t)
    return buffer


def sample_minibatch(buffer: ReplayBuffer, batch_size: int, stream: np.random.Generator) -> Batch:
    return buffer.sample(batch_size, stream)
