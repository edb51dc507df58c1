"""Single-cell geometry and channel gains for the D2D underlay downlink.

All gains are linear power gains; powers are handled in mW internally and
configured in dBm. The base station sits at the origin and CUE ``m`` is
pre-assigned resource block ``m``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np

MIN_DISTANCE_KM = 0.001
_MAX_REJECTIONS = 10_000


@dataclass(frozen=True)
class ScenarioConfig:
    cell_radius_m: float = 500.0
    n_cues: int = 10
    n_d2d: int = 10
    n_rbs: int = 10
    max_d2d_dist_m: float = 30.0
    p_bs_dbm: float = 46.0
    p_d2d_dbm: float = 13.0
    noise_density_dbm_hz: float = -174.0
    rb_bandwidth_hz: float = 180e3
    cue_sinr_min_db: float = 0.0
    r_neg: float = -1.0
    lambda_neighbors: int = 3
    gamma: float = 0.95
    fading_enabled: bool = True
    shadowing_sigma_db: float = 0.0
    # observe BS->D2D transmitter gain instead of BS->receiver
    gc_literal_tx: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n_cues != self.n_rbs:
            raise ValueError(f"n_cues ({self.n_cues}) must equal n_rbs ({self.n_rbs})")
        if self.n_rbs < 1:
            raise ValueError("n_rbs must be at least 1")
        if self.n_d2d < 0:
            raise ValueError("n_d2d must be non-negative")
        if not 0 < self.max_d2d_dist_m < self.cell_radius_m:
            raise ValueError("need 0 < max_d2d_dist_m < cell_radius_m")
        if self.n_d2d > 0 and not 0 <= self.lambda_neighbors <= self.n_d2d - 1:
            raise ValueError(
                f"lambda_neighbors must lie in [0, n_d2d - 1], got {self.lambda_neighbors}"
            )
        if self.lambda_neighbors < 0:
            raise ValueError("lambda_neighbors must be non-negative")
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not self.r_neg < 0:
            raise ValueError(f"r_neg must be negative, got {self.r_neg}")
        if self.rb_bandwidth_hz <= 0:
            raise ValueError("rb_bandwidth_hz must be positive")
        if self.shadowing_sigma_db < 0:
            raise ValueError("shadowing_sigma_db must be non-negative")

    @property
    def p_bs_mw(self) -> float:
        return float(dbm_to_mw(self.p_bs_dbm))

    @property
    def p_d2d_mw(self) -> float:
        return float(dbm_to_mw(self.p_d2d_dbm))

    @property
    def obs_dim(self) -> int:
        return 3 + self.n_rbs

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class Topology:
    bs_pos: np.ndarray  # (2,)
    cue_pos: np.ndarray  # (M, 2)
    d2d_tx_pos: np.ndarray  # (N, 2)
    d2d_rx_pos: np.ndarray  # (N, 2)
    cue_rb: np.ndarray  # (M,) int

    @property
    def n_d2d(self) -> int:
        return len(self.d2d_tx_pos)

    @property
    def n_cues(self) -> int:
        return len(self.cue_pos)

    def cue_on_rb(self) -> np.ndarray:
        """Inverse of ``cue_rb``: index of the CUE served on each RB."""
        inv = np.empty_like(self.cue_rb)
        inv[self.cue_rb] = np.arange(len(self.cue_rb))
        return inv


@dataclass(frozen=True)
class ChannelGains:
    g_bc: np.ndarray  # (M,) BS -> CUE m
    g_tr: np.ndarray  # (N,) D2D tx n -> D2D rx n
    g_tc: np.ndarray  # (N, M) D2D tx n -> CUE m
    g_br: np.ndarray  # (N,) BS -> D2D rx n
    g_trx: np.ndarray  # (N, N) D2D tx i -> D2D rx n, diagonal unused
    noise_mw: float
    g_bt: np.ndarray | None = None  # (N,) BS -> D2D tx n, observation switch only

    def scaled(self, fading: "ChannelGains") -> "ChannelGains":
        """Elementwise product with a fading realization (noise unchanged)."""
        return ChannelGains(
            g_bc=self.g_bc * fading.g_bc,
            g_tr=self.g_tr * fading.g_tr,
            g_tc=self.g_tc * fading.g_tc,
            g_br=self.g_br * fading.g_br,
            g_trx=self.g_trx * fading.g_trx,
            noise_mw=self.noise_mw,
            g_bt=None if self.g_bt is None else self.g_bt * fading.g_bt,
        )


def dbm_to_mw(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    return 10.0 * np.log10(mw)


def pathloss_cellular_db(d_km):
    """BS-involving links: 128.1 + 37.6 log10(d[km])."""
    return 128.1 + 37.6 * np.log10(np.maximum(d_km, MIN_DISTANCE_KM))


def pathloss_d2d_db(d_km):
    """Device-to-device links: exponent 4 with a 148 dB intercept at 1 km."""
    return 148.0 + 40.0 * np.log10(np.maximum(d_km, MIN_DISTANCE_KM))


def noise_power_mw(density_dbm_hz: float, bandwidth_hz: float) -> float:
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth_hz must be positive")
    return 10.0 ** ((density_dbm_hz + 10.0 * np.log10(bandwidth_hz)) / 10.0)


def _uniform_disk(stream: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(stream.random(n))
    theta = 2.0 * np.pi * stream.random(n)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def sample_topology(config: ScenarioConfig, stream: np.random.Generator) -> Topology:
    """Drop CUEs and D2D pairs uniformly in the cell.

    Each receiver is uniform in the disk of radius ``max_d2d_dist_m`` around
    its transmitter, redrawn until it also falls inside the cell. Pairs are
    drawn one after another (transmitter, then receiver), so with the same
    stream a topology with more pairs extends one with fewer.
    """
    R = config.cell_radius_m
    cue_pos = _uniform_disk(stream, config.n_cues, R)
    tx = np.empty((config.n_d2d, 2))
    rx = np.empty((config.n_d2d, 2))
    for n in range(config.n_d2d):
        tx[n] = _uniform_disk(stream, 1, R)[0]
        for _ in range(_MAX_REJECTIONS):
            cand = tx[n] + _uniform_disk(stream, 1, config.max_d2d_dist_m)[0]
            if np.hypot(cand[0], cand[1]) <= R:
                rx[n] = cand
                break
        else:
            raise RuntimeError("receiver placement exceeded retry cap; degenerate geometry")
    return Topology(
        bs_pos=np.zeros(2),
        cue_pos=cue_pos,
        d2d_tx_pos=tx,
        d2d_rx_pos=rx,
        cue_rb=np.arange(config.n_cues),
    )


def _dist_km(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise distances in km between point sets a (P, 2) and b (Q, 2)."""
    diff = a[:, None, :] - b[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1]) / 1000.0


def large_scale_gains(
    topology: Topology, config: ScenarioConfig, stream: np.random.Generator | None = None
) -> ChannelGains:
    """Pathloss plus (optional) log-normal shadowing, no small-scale fading.

    Shadowing draws come from ``stream`` in a fixed order and are skipped
    entirely when the spread is zero.
    """
    bs = topology.bs_pos[None, :]
    tx, rx, cue = topology.d2d_tx_pos, topology.d2d_rx_pos, topology.cue_pos
    n = len(tx)

    pl_bc = pathloss_cellular_db(_dist_km(bs, cue)[0])
    pl_br = pathloss_cellular_db(_dist_km(bs, rx)[0])
    pl_bt = pathloss_cellular_db(_dist_km(bs, tx)[0])
    pl_trx = pathloss_d2d_db(_dist_km(tx, rx))  # [i, n]: tx i -> rx n
    pl_tr = np.diagonal(pl_trx).copy() if n else np.zeros(0)
    pl_tc = pathloss_d2d_db(_dist_km(tx, cue)) if n else np.zeros((0, len(cue)))

    sigma = config.shadowing_sigma_db
    if sigma > 0:
        if stream is None:
            raise ValueError("shadowing requires an rng stream")
        pl_bc = pl_bc + stream.normal(0.0, sigma, pl_bc.shape)
        pl_tr = pl_tr + stream.normal(0.0, sigma, pl_tr.shape)
        pl_tc = pl_tc + stream.normal(0.0, sigma, pl_tc.shape)
        pl_br = pl_br + stream.normal(0.0, sigma, pl_br.shape)
        pl_trx = pl_trx + stream.normal(0.0, sigma, pl_trx.shape)
        pl_bt = pl_bt + stream.normal(0.0, sigma, pl_bt.shape)

    lin = lambda db: 10.0 ** (-np.asarray(db) / 10.0)  # noqa: E731
    return ChannelGains(
        g_bc=lin(pl_bc),
        g_tr=lin(pl_tr),
        g_tc=lin(pl_tc).reshape(n, len(cue)),
        g_br=lin(pl_br),
        g_trx=lin(pl_trx).reshape(n, n),
        noise_mw=noise_power_mw(config.noise_density_dbm_hz, config.rb_bandwidth_hz),
        g_bt=lin(pl_bt),
    )


def draw_fading(base: ChannelGains, stream: np.random.Generator) -> ChannelGains:
    """One unit-mean exponential (Rayleigh power) draw per link."""
    ex = lambda a: stream.exponential(1.0, np.shape(a))  # noqa: E731
    return ChannelGains(
        g_bc=ex(base.g_bc),
        g_tr=ex(base.g_tr),
        g_tc=ex(base.g_tc),
        g_br=ex(base.g_br),
        g_trx=ex(base.g_trx),
        noise_mw=base.noise_mw,
        g_bt=None if base.g_bt is None else ex(base.g_bt),
    )


def apply_fading(
    base: ChannelGains, config: ScenarioConfig, stream: np.random.Generator | None
) -> ChannelGains:
    if not config.fading_enabled:
        return base
    if stream is None:
        raise ValueError("fading requires an rng stream")
    return base.scaled(draw_fading(base, stream))


def compute_gains(
    topology: Topology, config: ScenarioConfig, stream: np.random.Generator | None = None
) -> ChannelGains:
    """Large-scale gains times one small-scale fading realization."""
    return apply_fading(large_scale_gains(topology, config, stream), config, stream)
