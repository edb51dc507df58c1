"""Neighbor-agent actor-critic updates.

Agent i owns an actor mapping its own observation to K RB logits and a
critic scoring the stacked observations and one-hot actions of its
neighbor set (itself first). Discrete choices enter the critic as one-hots;
during the actor step the agent's own slot is replaced by a Gumbel-Softmax
relaxation of its logits so the critic's action gradient reaches the actor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..neural import (
    AdamState,
    CriticNetwork,
    DenseNetwork,
    apply_adam,
    gumbel_softmax,
    gumbel_softmax_backward,
    sample_gumbel,
    soft_update,
)
from .buffer import Batch


@dataclass
class AgentBundle:
    index: int
    actor: DenseNetwork
    critic: CriticNetwork
    target_actor: DenseNetwork
    target_critic: CriticNetwork
    actor_opt: AdamState
    critic_opt: AdamState

    @classmethod
    def create(
        cls,
        index: int,
        obs_dim: int,
        n_actions: int,
        n_neighbors: int,
        rng: np.random.Generator,
        *,
        hidden: int = 64,
        actor_lr: float = 1e-4,
        critic_lr: float = 1e-3,
        **adam_kw,
    ) -> "AgentBundle":
        actor = DenseNetwork([obs_dim, hidden, hidden, n_actions], rng)
        critic = CriticNetwork(
            n_neighbors * obs_dim, n_neighbors * n_actions, rng, hidden=hidden, head=(hidden,)
        )
        return cls(
            index=index,
            actor=actor,
            critic=critic,
            target_actor=actor.copy(),
            target_critic=critic.copy(),
            actor_opt=AdamState.for_params(actor.params, actor_lr, **adam_kw),
            critic_opt=AdamState.for_params(critic.params, critic_lr, **adam_kw),
        )

    def soft_update_targets(self, tau: float) -> None:
        soft_update(self.target_actor, self.actor, tau)
        soft_update(self.target_critic, self.critic, tau)


def one_hot(idx, k: int) -> np.ndarray:
    idx = np.asarray(idx)
    out = np.zeros(idx.shape + (k,))
    np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
    return out


def select_action(
    actor: DenseNetwork,
    observation: np.ndarray,
    *,
    epsilon: float = 0.0,
    stream: np.random.Generator | None = None,
) -> tuple[int, np.ndarray]:
    """Epsilon-greedy over the actor's logits; greedy ties go to the lowest RB.

    Only the agent's own observation and actor are touched, which is what
    decentralized execution requires.
    """
    logits, _ = actor.forward(observation)
    k = len(logits)
    rb = int(np.argmax(logits))
    if epsilon > 0.0:
        if stream is None:
            raise ValueError("exploration needs an rng stream")
        if stream.random() < epsilon:
            rb = int(stream.integers(k))
    return rb, one_hot(rb, k)


def gather(block: np.ndarray, nb: np.ndarray) -> np.ndarray:
    """Stack per-agent rows of ``block`` (B, N, W) for neighbor rows ``nb`` (B, L)."""
    B = block.shape[0]
    return block[np.arange(B)[:, None], nb].reshape(B, -1)


def greedy_one_hots(actors, states: np.ndarray, nb: np.ndarray, n_actions: int) -> np.ndarray:
    """One-hot argmax actions of ``actors[j]`` at ``states[:, j]`` for j in each row of nb.

    Returns (B, L, K). Each distinct agent's actor is run once on the batch.
    """
    B, L = nb.shape
    out = np.zeros((B, L, n_actions))
    for j in np.unique(nb):
        logits, _ = actors[j].forward(states[:, j, :])
        oh = one_hot(np.argmax(logits, axis=-1), n_actions)
        mask = nb == j
        out[mask] = np.broadcast_to(oh[:, None, :], (B, L, n_actions))[mask]
    return out


def greedy_indices(actors, states: np.ndarray, agents) -> np.ndarray:
    """(B, N) argmax RB of ``actors[j]`` at ``states[:, j]``; -1 for agents not listed."""
    out = np.full(states.shape[:2], -1, dtype=np.int64)
    for j in agents:
        logits, _ = actors[j].forward(states[:, j, :])
        out[:, j] = np.argmax(logits, axis=-1)
    return out


def critic_target(
    bundle: AgentBundle,
    batch: Batch,
    nb: np.ndarray,
    target_actors,
    gamma: float,
    *,
    critic: CriticNetwork | None = None,
    next_actions: np.ndarray | None = None,
) -> np.ndarray:
    """y_i = r_i + gamma * Q_i'(s'_nb, a'_nb) with a'_j the greedy target-actor choice.

    ``nb`` is the (B, L) neighbor rows for agent i. ``critic`` defaults to
    the target critic; pass the live one to bootstrap literally.
    ``next_actions`` (B, L, K) may carry the a'_nb one-hots when they were
    already computed for several agents at once.
    """
    critic = bundle.target_critic if critic is None else critic
    i = bundle.index
    r = batch.rewards[:, i]
    if gamma == 0.0:
        return r.copy()
    K = batch.actions.shape[-1]
    if next_actions is None:
        a_next = greedy_one_hots(target_actors, batch.next_states, nb, K)
    else:
        a_next = next_actions
    q_next, _ = critic.forward(gather(batch.next_states, nb), a_next.reshape(len(r), -1))
    return r + gamma * q_next


def update_critic(bundle: AgentBundle, batch: Batch, nb: np.ndarray, targets: np.ndarray) -> float:
    """One Adam step on the mean squared error; returns the pre-step loss."""
    q, cache = bundle.critic.forward(gather(batch.states, nb), gather(batch.actions, nb))
    err = q - targets
    loss = float(np.mean(err**2))
    grads, _, _ = bundle.critic.backward(cache, 2.0 * err / len(err))
    apply_adam(bundle.critic, grads, bundle.critic_opt)
    return loss


def actor_objective(
    bundle: AgentBundle, batch: Batch, nb: np.ndarray, noise: np.ndarray, temperature: float
) -> tuple[float, np.ndarray]:
    """Mean critic value with the agent's own action relaxed, and its actor gradient.

    Neighbors keep their buffered one-hot actions. The Gumbel ``noise`` is
    an input so the value is a deterministic function of the actor weights.
    """
    i = bundle.index
    B = len(batch)
    K = batch.actions.shape[-1]
    logits, a_cache = bundle.actor.forward(batch.states[:, i, :])
    relaxed = gumbel_softmax(logits, noise, temperature)
    acts = batch.actions[np.arange(B)[:, None], nb].copy()  # (B, L, K)
    acts[:, 0, :] = relaxed  # nb rows start with the agent itself
    q, c_cache = bundle.critic.forward(gather(batch.states, nb), acts.reshape(B, -1))
    _, _, d_act = bundle.critic.backward(c_cache, np.full(B, 1.0 / B))
    d_logits = gumbel_softmax_backward(relaxed, d_act[:, :K], temperature)
    grads, _ = bundle.actor.backward(a_cache, d_logits)
    return float(np.mean(q)), grads


def update_actor(
    bundle: AgentBundle,
    batch: Batch,
    nb: np.ndarray,
    temperature: float,
    stream: np.random.Generator,
) -> float:
    """Gradient ascent step on the critic's value of the relaxed own action."""
    noise = sample_gumbel((len(batch), batch.actions.shape[-1]), stream)
    value, grads = actor_objective(bundle, batch, nb, noise, temperature)
    apply_adam(bundle.actor, -grads, bundle.actor_opt)
    return value


# Independent actor-critic: the single-agent rule with Q(s_i, a_i). Written
# without neighbor bookkeeping so it can be checked against NAAC at lambda=0.


def ac_critic_target(bundle: AgentBundle, batch: Batch, gamma: float, *, actor=None, critic=None):
    i = bundle.index
    r = batch.rewards[:, i]
    if gamma == 0.0:
        return r.copy()
    actor = bundle.target_actor if actor is None else actor
    critic = bundle.target_critic if critic is None else critic
    s2 = batch.next_states[:, i, :]
    logits, _ = actor.forward(s2)
    a2 = one_hot(np.argmax(logits, axis=-1), batch.actions.shape[-1])
    q2, _ = critic.forward(s2, a2)
    return r + gamma * q2


def ac_update_critic(bundle: AgentBundle, batch: Batch, targets: np.ndarray) -> float:
    i = bundle.index
    q, cache = bundle.critic.forward(batch.states[:, i, :], batch.actions[:, i, :])
    err = q - targets
    loss = float(np.mean(err**2))
    grads, _, _ = bundle.critic.backward(cache, 2.0 * err / len(err))
    apply_adam(bundle.critic, grads, bundle.critic_opt)
    return loss


def ac_update_actor(bundle: AgentBundle, batch: Batch, temperature: float, stream) -> float:
    i = bundle.index
    s = batch.states[:, i, :]
    B = len(s)
    noise = sample_gumbel((B, batch.actions.shape[-1]), stream)
    logits, a_cache = bundle.actor.forward(s)
    relaxed = gumbel_softmax(logits, noise, temperature)
    q, c_cache = bundle.critic.forward(s, relaxed)
    _, _, d_act = bundle.critic.backward(c_cache, np.full(B, 1.0 / B))
    grads, _ = bundle.actor.backward(a_cache, gumbel_softmax_backward(relaxed, d_act, temperature))
    apply_adam(bundle.actor, -grads, bundle.actor_opt)
    return float(np.mean(q))
