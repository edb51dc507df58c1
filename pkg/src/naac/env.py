"""Partially observable Markov game for RB selection by D2D pairs.

Each D2D pair picks one RB per slot (``rb_of[n]``). Observations are
``3 + K`` vectors laid out as

    [own-link gain, BS gain, previous interference, one-hot previous RB]

with the three scalars in normalized dB (see :func:`build_observation`).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .topo_channel import ChannelGains, ScenarioConfig, Topology, apply_fading, large_scale_gains

DB_CENTER = 120.0
DB_SCALE = 60.0
NORM_CLAMP = 2.0
INTERFERENCE_FLOOR_DBM = -150.0
ORACLE_MAX_PROFILES = 10**6


class OracleSizeError(ValueError):
    """Raised when exhaustive enumeration would exceed the profile budget."""


def check_profile(rb_of, n_rbs: int) -> np.ndarray:
    rb = np.asarray(rb_of)
    if rb.size == 0:
        return rb.astype(int).reshape(0)
    if rb.ndim != 1 or not np.issubdtype(rb.dtype, np.integer):
        raise ValueError("action profile must be a 1-D integer vector")
    if rb.size and (rb.min() < 0 or rb.max() >= n_rbs):
        raise ValueError(f"RB index out of range [0, {n_rbs}): {rb.tolist()}")
    return rb


def allocation_matrix(rb_of, n_rbs: int) -> np.ndarray:
    """A[n, k] = 1 iff pair n transmits on RB k."""
    rb = check_profile(rb_of, n_rbs)
    A = np.zeros((len(rb), n_rbs), dtype=np.int8)
    A[np.arange(len(rb)), rb] = 1
    return A


def _rb_of_cue(topology_cue_rb: np.ndarray | None, m: int) -> int:
    return m if topology_cue_rb is None else int(topology_cue_rb[m])


def cue_sinr(gains: ChannelGains, rb_of, config: ScenarioConfig, m: int, cue_rb=None) -> float:
    k = _rb_of_cue(cue_rb, m)
    rb = np.asarray(rb_of)
    interf = sum(config.p_d2d_mw * gains.g_tc[n, m] for n in np.flatnonzero(rb == k))
    return config.p_bs_mw * gains.g_bc[m] / (interf + gains.noise_mw)


def d2d_sinr(gains: ChannelGains, rb_of, config: ScenarioConfig, n: int) -> float:
    rb = np.asarray(rb_of)
    co = [i for i in np.flatnonzero(rb == rb[n]) if i != n]
    interf = config.p_bs_mw * gains.g_br[n] + sum(config.p_d2d_mw * gains.g_trx[i, n] for i in co)
    return config.p_d2d_mw * gains.g_tr[n] / (interf + gains.noise_mw)


def all_sinrs(gains: ChannelGains, rb_of, config: ScenarioConfig, cue_rb=None):
    """Vectorized SINRs for every CUE and D2D receiver.

    Returns ``(cue_sinr (M,), d2d_sinr (N,), d2d_interference_mw (N,))`` where
    the interference excludes noise and the own signal.
    """
    rb = np.asarray(rb_of)
    M = len(gains.g_bc)
    cue_rb = np.arange(M) if cue_rb is None else np.asarray(cue_rb)
    p_d, p_b = config.p_d2d_mw, config.p_bs_mw

    on_cue_rb = rb[:, None] == cue_rb[None, :]  # (N, M)
    cue_interf = p_d * np.sum(gains.g_tc * on_cue_rb, axis=0)
    cue = p_b * gains.g_bc / (cue_interf + gains.noise_mw)

    co = rb[:, None] == rb[None, :]  # (N, N) [i, n]
    np.fill_diagonal(co, False)
    d2d_interf = p_b * gains.g_br + p_d * np.sum(gains.g_trx * co, axis=0)
    d2d = p_d * gains.g_tr / (d2d_interf + gains.noise_mw)
    return cue, d2d, d2d_interf


def sinr_db(lin):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(lin)


def reward_for_agent(
    cue_sinr_db: np.ndarray, d2d_sinr_lin: np.ndarray, rb_of, config: ScenarioConfig, i: int,
    cue_on_rb=None,
) -> float:
    """Rate of agent ``i`` if the CUE on its RB meets the threshold, else ``r_neg``."""
    k = int(np.asarray(rb_of)[i])
    m = k if cue_on_rb is None else int(cue_on_rb[k])
    if cue_sinr_db[m] < config.cue_sinr_min_db:
        return float(config.r_neg)
    return float(np.log2(1.0 + d2d_sinr_lin[i]))


def sum_rate(gains: ChannelGains, rb_of, config: ScenarioConfig) -> float:
    """D2D sum rate in bit/s/Hz when every pair transmits on its chosen RB."""
    _, d2d, _ = all_sinrs(gains, rb_of, config)
    return float(np.sum(np.log2(1.0 + d2d)))


@dataclass
class SlotRecord:
    """What a receiver remembers from the previous slot (``None`` at t=0)."""

    interference_mw: np.ndarray | None = None
    rb_of: np.ndarray | None = None


def _norm_db(db):
    return np.clip((np.asarray(db) + DB_CENTER) / DB_SCALE, -NORM_CLAMP, NORM_CLAMP)


def build_observation(
    prev: SlotRecord, gains: ChannelGains, i: int, config: ScenarioConfig
) -> np.ndarray:
    K = config.n_rbs
    obs = np.zeros(3 + K)
    g_c = gains.g_bt[i] if config.gc_literal_tx else gains.g_br[i]
    obs[0] = _norm_db(10.0 * np.log10(gains.g_tr[i]))
    obs[1] = _norm_db(10.0 * np.log10(g_c))
    if prev.interference_mw is None or prev.interference_mw[i] <= 0:
        i_dbm = INTERFERENCE_FLOOR_DBM
    else:
        i_dbm = 10.0 * np.log10(prev.interference_mw[i])
    obs[2] = _norm_db(i_dbm)
    if prev.rb_of is not None:
        obs[3 + int(prev.rb_of[i])] = 1.0
    return obs


def build_observations(prev: SlotRecord, gains: ChannelGains, config: ScenarioConfig) -> np.ndarray:
    """All agents' observations stacked as (N, 3 + K)."""
    N, K = len(gains.g_tr), config.n_rbs
    obs = np.zeros((N, 3 + K))
    if N == 0:
        return obs
    g_c = gains.g_bt if config.gc_literal_tx else gains.g_br
    obs[:, 0] = _norm_db(10.0 * np.log10(gains.g_tr))
    obs[:, 1] = _norm_db(10.0 * np.log10(g_c))
    if prev.interference_mw is None:
        obs[:, 2] = _norm_db(INTERFERENCE_FLOOR_DBM)
    else:
        I = prev.interference_mw
        with np.errstate(divide="ignore"):
            i_dbm = np.where(I > 0, 10.0 * np.log10(np.where(I > 0, I, 1.0)), INTERFERENCE_FLOOR_DBM)
        obs[:, 2] = _norm_db(i_dbm)
    if prev.rb_of is not None:
        obs[np.arange(N), 3 + np.asarray(prev.rb_of)] = 1.0
    return obs


def interference_dbm_from_obs(obs: np.ndarray) -> np.ndarray:
    """Invert the interference normalization (exact inside the clamp range)."""
    return np.asarray(obs)[..., 2] * DB_SCALE - DB_CENTER


@dataclass
class StepOutcome:
    next_obs: np.ndarray  # (N, 3 + K)
    rewards: np.ndarray  # (N,)
    cue_sinr_db: np.ndarray  # (M,)
    d2d_sinr_db: np.ndarray  # (N,)
    cue_outage_flags: np.ndarray  # (M,) bool
    sum_rate_bps_hz: float
    interference_mw: np.ndarray  # (N,) per-receiver, noise and own signal excluded


class D2DEnv:
    """One cell with fixed geometry; small-scale fading redrawn every slot.

    Gains for a slot are drawn before the agents observe it, so the
    observation at slot t already carries that slot's own-link gain.
    """

    def __init__(
        self,
        config: ScenarioConfig,
        topology: Topology,
        stream: np.random.Generator | None = None,
        base_gains: ChannelGains | None = None,
    ):
        self.config = config
        self.topology = topology
        self.stream = stream
        self.base_gains = (
            base_gains if base_gains is not None else large_scale_gains(topology, config, stream)
        )
        self._cue_on_rb = topology.cue_on_rb()
        self.gains: ChannelGains = self.base_gains
        self.record = SlotRecord()
        self.t = 0

    @property
    def n_agents(self) -> int:
        return self.topology.n_d2d

    def reset(self) -> np.ndarray:
        self.record = SlotRecord()
        self.t = 0
        self.gains = apply_fading(self.base_gains, self.config, self.stream)
        return build_observations(self.record, self.gains, self.config)

    def evaluate(self, rb_of) -> StepOutcome:
        """SINRs, rewards and metrics under the current gains, no state change."""
        cfg = self.config
        rb = check_profile(rb_of, cfg.n_rbs)
        if len(rb) != self.n_agents:
            raise ValueError(f"expected {self.n_agents} actions, got {len(rb)}")
        cue, d2d, interf = all_sinrs(self.gains, rb, cfg, self.topology.cue_rb)
        cue_db = sinr_db(cue)
        outage = cue_db < cfg.cue_sinr_min_db
        rates = np.log2(1.0 + d2d)
        penalized = outage[self._cue_on_rb[rb]] if len(rb) else np.zeros(0, bool)
        rewards = np.where(penalized, cfg.r_neg, rates)
        return StepOutcome(
            next_obs=np.zeros((0, cfg.obs_dim)),
            rewards=rewards,
            cue_sinr_db=cue_db,
            d2d_sinr_db=sinr_db(d2d),
            cue_outage_flags=outage,
            sum_rate_bps_hz=float(np.sum(rates)),
            interference_mw=interf,
        )

    def step(self, rb_of) -> StepOutcome:
        out = self.evaluate(rb_of)
        self.record = SlotRecord(interference_mw=out.interference_mw, rb_of=np.array(rb_of))
        self.gains = apply_fading(self.base_gains, self.config, self.stream)
        self.t += 1
        out.next_obs = build_observations(self.record, self.gains, self.config)
        return out


@dataclass
class OracleResult:
    best_feasible: np.ndarray | None
    best_feasible_value: float
    best_any: np.ndarray
    best_any_value: float


def enumerate_profiles(n_agents: int, n_rbs: int):
    """All K^N profiles in lexicographic order."""
    return itertools.product(range(n_rbs), repeat=n_agents)


def brute_force_oracle(gains: ChannelGains, config: ScenarioConfig, cue_rb=None) -> OracleResult:
    """Exhaustive maximization of the D2D sum rate, with and without CUE constraints.

    Ties go to the lexicographically smallest profile because enumeration is
    lexicographic and only strict improvements replace the incumbent.
    """
    N, K = len(gains.g_tr), config.n_rbs
    if K**N > ORACLE_MAX_PROFILES:
        raise OracleSizeError(f"K^N = {K}^{N} exceeds {ORACLE_MAX_PROFILES} profiles")
    best_any, best_any_val = None, -np.inf
    best_feas, best_feas_val = None, -np.inf
    for prof in enumerate_profiles(N, K):
        rb = np.array(prof, dtype=int)
        cue, d2d, _ = all_sinrs(gains, rb, config, cue_rb)
        val = float(np.sum(np.log2(1.0 + d2d)))
        if val > best_any_val:
            best_any, best_any_val = rb, val
        if np.all(sinr_db(cue) >= config.cue_sinr_min_db) and val > best_feas_val:
            best_feas, best_feas_val = rb, val
    return OracleResult(best_feas, best_feas_val, best_any, best_any_val)
