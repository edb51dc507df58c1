"""Comparison learners: per-agent DQN, tabular Q-learning and uniform random."""

from __future__ import annotations

import numpy as np

from ..env import interference_dbm_from_obs
from ..neural import AdamState, DenseNetwork, apply_adam, soft_update
from .buffer import Batch

# Interference bins in dBm: <-110, [-110, -95), [-95, -80), >=-80
INTERFERENCE_EDGES_DBM = (-110.0, -95.0, -80.0)


def q_state_index(obs: np.ndarray, n_rbs: int) -> int:
    """Tabular state: interference bin x previous RB (or none at t=0)."""
    obs = np.asarray(obs)
    bin_ = int(np.searchsorted(INTERFERENCE_EDGES_DBM, interference_dbm_from_obs(obs), side="right"))
    onehot = obs[3 : 3 + n_rbs]
    prev = int(np.argmax(onehot)) + 1 if onehot.sum() > 0 else 0
    return bin_ * (n_rbs + 1) + prev


def n_q_states(n_rbs: int) -> int:
    return (len(INTERFERENCE_EDGES_DBM) + 1) * (n_rbs + 1)


def epsilon_greedy(values: np.ndarray, epsilon: float, stream: np.random.Generator | None) -> int:
    a = int(np.argmax(values))
    if epsilon > 0.0 and stream.random() < epsilon:
        a = int(stream.integers(len(values)))
    return a


def q_learning_update(table: np.ndarray, s: int, a: int, r: float, s2: int, alpha: float, gamma: float) -> float:
    """Q(s,a) += alpha * (r + gamma * max Q(s2) - Q(s,a)); returns the TD error."""
    td = r + gamma * np.max(table[s2]) - table[s, a]
    table[s, a] += alpha * td
    return float(td)


class DQNAgent:
    def __init__(self, index: int, obs_dim: int, n_actions: int, rng, *, hidden=64, lr=1e-3,
                 init="uniform", **adam_kw):
        self.index = index
        self.net = DenseNetwork([obs_dim, hidden, hidden, n_actions], rng, init=init)
        self.target = self.net.copy()
        self.opt = AdamState.for_params(self.net.params, lr, **adam_kw)

    def act(self, obs, epsilon: float = 0.0, stream=None) -> int:
        q, _ = self.net.forward(obs)
        return epsilon_greedy(q, epsilon, stream)

    def td_targets(self, batch: Batch, gamma: float) -> np.ndarray:
        r = batch.rewards[:, self.index]
        if gamma == 0.0:
            return r.copy()
        q2, _ = self.target.forward(batch.next_states[:, self.index, :])
        return r + gamma * np.max(q2, axis=-1)

    def loss(self, batch: Batch, targets: np.ndarray):
        i = self.index
        q, cache = self.net.forward(batch.states[:, i, :])
        taken = batch.actions[:, i, :]
        err = np.sum(q * taken, axis=-1) - targets
        return float(np.mean(err**2)), cache, taken * (2.0 * err / len(err))[:, None]

    def update(self, batch: Batch, gamma: float, tau: float) -> float:
        targets = self.td_targets(batch, gamma)
        loss, cache, d_out = self.loss(batch, targets)
        grads, _ = self.net.backward(cache, d_out)
        apply_adam(self.net, grads, self.opt)
        soft_update(self.target, self.net, tau)
        return loss
