"""Episode/slot training loop shared by every method.

Per episode the topology is redrawn (unless frozen), neighbor sets are
rebuilt and observations reset. Per slot all agents act, the environment
steps, the joint transition is stored and each agent updates in ascending
index order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..config import RunConfig, effective_lambda
from ..env import D2DEnv
from ..seeding import make_stream
from ..topo_channel import ScenarioConfig, Topology, sample_topology
from .baselines import DQNAgent, epsilon_greedy, n_q_states, q_learning_update, q_state_index
from .buffer import ReplayBuffer, Transition
from .naac import (
    AgentBundle,
    ac_critic_target,
    ac_update_actor,
    ac_update_critic,
    critic_target,
    greedy_indices,
    one_hot,
    select_action,
    update_actor,
    update_critic,
)
from .neighbors import neighbor_sets

log = logging.getLogger(__name__)


def linear_schedule(start: float, end: float, step: int, horizon: float) -> float:
    if horizon <= 0:
        return end
    frac = min(1.0, step / horizon)
    return start + frac * (end - start)


@dataclass
class EpisodeStats:
    episode: int
    total_reward: float
    outage_prob: float
    sum_rate: float
    mean_critic_loss: float
    n_updates: int = 0


# -- greedy execution policies ------------------------------------------------


class NetworkPolicy:
    """argmax of each agent's own network output (actor logits or Q-values)."""

    def __init__(self, nets):
        self.nets = list(nets)

    def act_agent(self, i: int, obs_i: np.ndarray) -> int:
        out, _ = self.nets[i].forward(obs_i)
        return int(np.argmax(out))

    def actions(self, obs: np.ndarray, streams=None) -> np.ndarray:
        return np.array([self.act_agent(i, obs[i]) for i in range(len(self.nets))], dtype=int)


class TablePolicy:
    def __init__(self, tables: np.ndarray, n_rbs: int):
        self.tables = tables
        self.n_rbs = n_rbs

    def actions(self, obs: np.ndarray, streams=None) -> np.ndarray:
        return np.array(
            [int(np.argmax(self.tables[i, q_state_index(obs[i], self.n_rbs)])) for i in range(len(obs))],
            dtype=int,
        )


class RandomPolicy:
    """Uniform RB per agent per slot, each agent drawing from its own stream."""

    def __init__(self, n_rbs: int):
        self.n_rbs = n_rbs

    def actions(self, obs: np.ndarray, streams) -> np.ndarray:
        return np.array([int(streams[i].integers(self.n_rbs)) for i in range(len(obs))], dtype=int)


# -- learners -----------------------------------------------------------------


class _Learner:
    method = ""

    def __init__(self, scenario: ScenarioConfig, run: RunConfig):
        self.scenario = scenario
        self.run = run
        self.N, self.K, self.D = scenario.n_d2d, scenario.n_rbs, scenario.obs_dim
        # one exploration stream per agent: acting never reads another agent's state
        self.act_streams = [make_stream(run.master_seed, "explore", 0, i) for i in range(self.N)]
        self.learn_stream = make_stream(run.master_seed, "learn")
        self.n_updates = 0

    def begin_episode(self, topology: Topology) -> None:
        pass

    def observe(self, obs, rb, rewards, next_obs, temperature) -> list[float]:
        return []

    def checkpoints(self) -> dict:
        return {}


class RandomLearner(_Learner):
    method = "random"

    def act(self, obs, epsilon, temperature):
        return self.policy().actions(obs, self.act_streams)

    def policy(self):
        return RandomPolicy(self.K)


class ActorCriticLearner(_Learner):
    """NAAC; with ``independent=True`` the single-agent actor-critic baseline."""

    def __init__(self, scenario, run, *, independent: bool = False):
        super().__init__(scenario, run)
        self.independent = independent
        self.method = "ac" if independent else "naac"
        self.lam = 0 if independent else effective_lambda(scenario, run)
        if self.N and self.lam > self.N - 1:
            raise ValueError(f"lambda={self.lam} needs at least {self.lam + 1} D2D pairs")
        L = self.lam + 1
        adam_kw = dict(beta1=run.adam_beta1, beta2=run.adam_beta2, eps=run.adam_eps)
        self.bundles = [
            AgentBundle.create(
                i, self.D, self.K, L, make_stream(run.master_seed, "init", 0, i),
                hidden=run.hidden, actor_lr=run.actor_lr, critic_lr=run.critic_lr, **adam_kw,
            )
            for i in range(self.N)
        ]
        self.buffer = ReplayBuffer(run.buffer_capacity, self.N, self.D, self.K, L)
        self.nb = np.tile(np.arange(self.N)[:, None], (1, L))

    def begin_episode(self, topology):
        self.nb = neighbor_sets(topology, self.lam)

    def act(self, obs, epsilon, temperature):
        return np.array(
            [select_action(b.actor, obs[i], epsilon=epsilon, stream=self.act_streams[i])[0]
             for i, b in enumerate(self.bundles)],
            dtype=int,
        )

    def observe(self, obs, rb, rewards, next_obs, temperature):
        self.buffer.push(Transition(obs, one_hot(rb, self.K), rewards, next_obs, self.nb))
        if len(self.buffer) < max(self.run.warmup, self.run.batch_size):
            return []
        run, gamma = self.run, self.scenario.gamma
        B = run.batch_size
        batches = [self.buffer.sample(B, self.learn_stream) for _ in self.bundles]
        actors = [x.actor if run.literal_eq12 else x.target_actor for x in self.bundles]
        if not self.independent and gamma > 0.0:
            # a' for every agent's minibatch from the pre-update actors, one pass per actor
            s2 = np.concatenate([bt.next_states for bt in batches])
            nbs = np.concatenate([bt.neighbors[:, k, :] for k, bt in enumerate(batches)])
            idx = greedy_indices(actors, s2, np.unique(nbs))
        losses = []
        for b, batch in zip(self.bundles, batches):
            critic = b.critic if run.literal_eq12 else b.target_critic
            if self.independent:
                y = ac_critic_target(b, batch, gamma, actor=actors[b.index], critic=critic)
                losses.append(ac_update_critic(b, batch, y))
                ac_update_actor(b, batch, temperature, self.learn_stream)
            else:
                nb_i = batch.neighbors[:, b.index, :]
                a_next = None
                if gamma > 0.0:
                    rows = idx[b.index * B : (b.index + 1) * B]
                    a_next = one_hot(np.take_along_axis(rows, nb_i, axis=1), self.K)
                y = critic_target(b, batch, nb_i, actors, gamma, critic=critic, next_actions=a_next)
                losses.append(update_critic(b, batch, nb_i, y))
                update_actor(b, batch, nb_i, temperature, self.learn_stream)
            if not run.literal_eq12:
                b.soft_update_targets(run.tau)
        self.n_updates += 1
        return losses

    def policy(self):
        return NetworkPolicy([b.actor for b in self.bundles])

    def checkpoints(self):
        return {f"{self.method}_agent{b.index}.params": b.actor for b in self.bundles}


class DQNLearner(_Learner):
    method = "dqn"

    def __init__(self, scenario, run, *, init: str = "uniform"):
        super().__init__(scenario, run)
        adam_kw = dict(beta1=run.adam_beta1, beta2=run.adam_beta2, eps=run.adam_eps)
        self.agents = [
            DQNAgent(i, self.D, self.K, make_stream(run.master_seed, "init", 0, i),
                     hidden=run.hidden, lr=run.critic_lr, init=init, **adam_kw)
            for i in range(self.N)
        ]
        self.buffer = ReplayBuffer(run.buffer_capacity, self.N, self.D, self.K, 1)

    def act(self, obs, epsilon, temperature):
        return np.array(
            [a.act(obs[a.index], epsilon, self.act_streams[a.index]) for a in self.agents], dtype=int
        )

    def observe(self, obs, rb, rewards, next_obs, temperature):
        self.buffer.push(Transition(obs, one_hot(rb, self.K), rewards, next_obs))
        if len(self.buffer) < max(self.run.warmup, self.run.batch_size):
            return []
        losses = [
            a.update(self.buffer.sample(self.run.batch_size, self.learn_stream),
                     self.scenario.gamma, self.run.tau)
            for a in self.agents
        ]
        self.n_updates += 1
        return losses

    def policy(self):
        return NetworkPolicy([a.net for a in self.agents])

    def checkpoints(self):
        return {f"dqn_agent{a.index}.params": a.net for a in self.agents}


class QLearner(_Learner):
    method = "qlearning"

    def __init__(self, scenario, run):
        super().__init__(scenario, run)
        self.tables = np.zeros((self.N, n_q_states(self.K), self.K))

    def act(self, obs, epsilon, temperature):
        return np.array(
            [epsilon_greedy(self.tables[i, q_state_index(obs[i], self.K)], epsilon, self.act_streams[i])
             for i in range(self.N)],
            dtype=int,
        )

    def observe(self, obs, rb, rewards, next_obs, temperature):
        tds = []
        for i in range(self.N):
            s, s2 = q_state_index(obs[i], self.K), q_state_index(next_obs[i], self.K)
            tds.append(q_learning_update(self.tables[i], s, int(rb[i]), float(rewards[i]), s2,
                                         self.run.q_alpha, self.scenario.gamma))
        self.n_updates += 1
        return [td * td for td in tds]

    def policy(self):
        return TablePolicy(self.tables, self.K)

    def checkpoints(self):
        return {f"qlearning_agent{i}.params": self.tables[i] for i in range(self.N)}


def make_learner(scenario: ScenarioConfig, run: RunConfig):
    if run.method == "naac":
        return ActorCriticLearner(scenario, run)
    if run.method == "ac":
        return ActorCriticLearner(scenario, run, independent=True)
    if run.method == "dqn":
        return DQNLearner(scenario, run)
    if run.method == "qlearning":
        return QLearner(scenario, run)
    if run.method == "random":
        return RandomLearner(scenario, run)
    raise ValueError(f"unknown method {run.method!r}")


@dataclass
class TrainResult:
    learner: object
    stats: list[EpisodeStats] = field(default_factory=list)


def train(
    scenario: ScenarioConfig,
    run: RunConfig,
    *,
    topology: Topology | None = None,
    learner=None,
) -> TrainResult:
    """Run ``run.episodes`` episodes of ``run.slots_per_episode`` slots.

    ``topology`` pins the geometry for every episode; otherwise it is redrawn
    per episode (or once, with ``run.frozen_topology``).
    """
    learner = make_learner(scenario, run) if learner is None else learner
    result = TrainResult(learner)
    horizon = run.explore_fraction * run.total_slots
    step = 0
    fixed = topology
    for ep in range(run.episodes):
        topo_stream = make_stream(run.master_seed, "topology", 0 if run.frozen_topology else ep)
        if fixed is None:
            topo = sample_topology(scenario, topo_stream)
            if run.frozen_topology:
                fixed = topo
        else:
            topo = fixed
        env = D2DEnv(scenario, topo, stream=make_stream(run.master_seed, "channel", ep))
        learner.begin_episode(topo)
        obs = env.reset()
        total, outages, rate, losses = 0.0, 0, 0.0, []
        for _ in range(run.slots_per_episode):
            eps = linear_schedule(run.eps_start, run.eps_end, step, horizon)
            temp = linear_schedule(run.temp_start, run.temp_end, step, horizon)
            rb = learner.act(obs, eps, temp)
            out = env.step(rb)
            losses.extend(learner.observe(obs, rb, out.rewards, out.next_obs, temp))
            total += float(np.sum(out.rewards))
            outages += int(np.sum(out.cue_outage_flags))
            rate += out.sum_rate_bps_hz
            obs = out.next_obs
            step += 1
        T = run.slots_per_episode
        result.stats.append(
            EpisodeStats(
                episode=ep,
                total_reward=total,
                outage_prob=outages / (scenario.n_cues * T),
                sum_rate=rate / T,
                mean_critic_loss=float(np.mean(losses)) if losses else float("nan"),
                n_updates=learner.n_updates,
            )
        )
        log.debug("%s episode %d total reward %.3f", learner.method, ep, total)
    return result


def train_naac(run: RunConfig, scenario: ScenarioConfig, **kw) -> TrainResult:
    return train(scenario, run.with_(method="naac"), **kw)


def train_ac(run: RunConfig, scenario: ScenarioConfig, **kw) -> TrainResult:
    return train(scenario, run.with_(method="ac"), **kw)


def train_dqn(run: RunConfig, scenario: ScenarioConfig, **kw) -> TrainResult:
    return train(scenario, run.with_(method="dqn"), **kw)


def train_qlearning(run: RunConfig, scenario: ScenarioConfig, **kw) -> TrainResult:
    return train(scenario, run.with_(method="qlearning"), **kw)
