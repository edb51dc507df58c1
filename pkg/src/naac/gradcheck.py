"""Finite-difference validation of every gradient path the learners use."""

from __future__ import annotations

import numpy as np

from .agents.buffer import Batch
from .agents.naac import AgentBundle, actor_objective, gather, one_hot
from .config import RunConfig, effective_lambda
from .neural import CriticNetwork, DenseNetwork, finite_diff_check, gumbel_softmax, sample_gumbel
from .seeding import make_stream
from .topo_channel import ScenarioConfig

DENSE_TOL = 1e-4
ACTOR_THROUGH_CRITIC_TOL = 1e-3
# Central differences straddling a ReLU kink measure a one-sided slope, not a
# backprop error, so draws with a hidden pre-activation this close to zero
# are replaced.
KINK_MARGIN = 1e-4
MAX_REDRAWS = 500


def relu_margin(net: DenseNetwork, cache) -> float:
    """Smallest |pre-activation| over the ReLU layers of one forward pass."""
    m = np.inf
    for z, act in zip(cache.preacts, net._act):
        if act:
            m = min(m, float(np.min(np.abs(z))))
    return m


def critic_margin(net: CriticNetwork, s, a) -> float:
    _, (c_s, c_h) = net.forward(s, a)
    return min(relu_margin(net.state_net, c_s), relu_margin(net.head_net, c_h))


def _redraw(draw, margin_of):
    for _ in range(MAX_REDRAWS):
        sample = draw()
        if margin_of(sample) > KINK_MARGIN:
            return sample
    raise RuntimeError("could not draw inputs away from ReLU kinks")


def _linear_loss(x, grad_out):
    """Loss sum(out * grad_out) so backward(cache, grad_out) is its exact gradient."""

    def fn(net):
        out, cache = net.forward(x)
        g, _ = net.backward(cache, grad_out)
        return float(np.sum(out * grad_out)), g

    return fn


def _critic_loss(s, a, grad_q):
    def fn(net):
        q, cache = net.forward(s, a)
        g, _, _ = net.backward(cache, grad_q)
        return float(np.sum(q * grad_q)), g

    return fn


def check_dense(dims, rng, batch: int = 8) -> float:
    net = DenseNetwork(dims, rng)
    x = _redraw(lambda: rng.uniform(-1.0, 1.0, (batch, dims[0])),
                lambda x: relu_margin(net, net.forward(x)[1]))
    return finite_diff_check(net, _linear_loss(x, rng.normal(size=(batch, dims[-1]))))


def check_critic(state_dim: int, action_dim: int, hidden: int, rng, batch: int = 8) -> float:
    net = CriticNetwork(state_dim, action_dim, rng, hidden=hidden, head=(hidden,))
    s, a = _redraw(
        lambda: (rng.uniform(-1.0, 1.0, (batch, state_dim)),
                 one_hot(rng.integers(action_dim, size=batch), action_dim)),
        lambda sa: critic_margin(net, *sa),
    )
    return finite_diff_check(net, _critic_loss(s, a, rng.normal(size=batch)))


def random_batch(n_agents: int, obs_dim: int, n_actions: int, n_nb: int, rng, batch: int = 8) -> Batch:
    nb = np.empty((batch, n_agents, n_nb), dtype=np.int64)
    for i in range(n_agents):
        others = [j for j in range(n_agents) if j != i]
        nb[:, i, 0] = i
        nb[:, i, 1:] = others[: n_nb - 1]
    return Batch(
        states=rng.uniform(-1.0, 1.0, (batch, n_agents, obs_dim)),
        actions=one_hot(rng.integers(n_actions, size=(batch, n_agents)), n_actions),
        rewards=rng.normal(size=(batch, n_agents)),
        next_states=rng.uniform(-1.0, 1.0, (batch, n_agents, obs_dim)),
        neighbors=nb,
    )


def check_actor_through_critic(bundle: AgentBundle, batch: Batch, temperature: float, rng) -> float:
    """Actor gradient of the relaxed critic value with the Gumbel noise frozen."""
    i = bundle.index
    B, K = len(batch), batch.actions.shape[-1]
    nb = batch.neighbors[:, i, :]
    logits, a_cache = bundle.actor.forward(batch.states[:, i, :])
    a_margin = relu_margin(bundle.actor, a_cache)
    if a_margin <= KINK_MARGIN:
        raise ValueError("batch states sit on an actor ReLU kink; redraw the batch")

    def margin(noise):
        acts = batch.actions[np.arange(B)[:, None], nb].copy()
        acts[:, 0, :] = gumbel_softmax(logits, noise, temperature)
        return critic_margin(bundle.critic, gather(batch.states, nb), acts.reshape(B, -1))

    noise = _redraw(lambda: sample_gumbel((B, K), rng), margin)

    def fn(actor):
        bundle.actor = actor
        return actor_objective(bundle, batch, nb, noise, temperature)

    return finite_diff_check(bundle.actor, fn)


def run_gradchecks(scenario: ScenarioConfig, run: RunConfig) -> dict:
    """Name -> (max relative error, tolerance) for each network shape the agents use."""
    rng = make_stream(run.master_seed, "gradcheck")
    D, K, H = scenario.obs_dim, scenario.n_rbs, run.hidden
    n_agents = max(scenario.n_d2d, 1)
    L = min(effective_lambda(scenario, run), n_agents - 1) + 1
    report = {
        "actor": (check_dense([D, H, H, K], rng), DENSE_TOL),
        "dqn": (check_dense([D, H, H, K], rng), DENSE_TOL),
        "critic": (check_critic(L * D, L * K, H, rng), DENSE_TOL),
        "critic_independent": (check_critic(D, K, H, rng), DENSE_TOL),
    }
    bundle = AgentBundle.create(0, D, K, L, rng, hidden=H)
    batch = _redraw(
        lambda: random_batch(n_agents, D, K, L, rng),
        lambda b: relu_margin(bundle.actor, bundle.actor.forward(b.states[:, 0, :])[1]),
    )
    for temp in (run.temp_start, run.temp_end):
        report[f"actor_through_critic_t{temp:g}"] = (
            check_actor_through_critic(bundle, batch, temp, rng),
            ACTOR_THROUGH_CRITIC_TOL,
        )
    return report
