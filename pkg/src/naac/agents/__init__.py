"""Learners: NAAC, independent actor-critic, DQN, tabular Q-learning, random."""

from .buffer import Batch, BufferNotReady, ReplayBuffer, Transition, push_transition, sample_minibatch
from .naac import (
    AgentBundle,
    actor_objective,
    critic_target,
    select_action,
    update_actor,
    update_critic,
)
from .neighbors import neighbor_sets
from .training import (
    EpisodeStats,
    TrainResult,
    make_learner,
    train,
    train_ac,
    train_dqn,
    train_naac,
    train_qlearning,
)

__all__ = [
    "AgentBundle", "Batch", "BufferNotReady", "EpisodeStats", "ReplayBuffer", "TrainResult",
    "Transition", "actor_objective", "critic_target", "make_learner", "neighbor_sets",
    "push_transition", "sample_minibatch", "select_action", "train", "train_ac", "train_dqn",
    "train_naac", "train_qlearning", "update_actor", "update_critic",
]
