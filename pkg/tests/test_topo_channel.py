import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from naac.seeding import make_stream
from naac.topo_channel import (
    ScenarioConfig,
    compute_gains,
    dbm_to_mw,
    draw_fading,
    large_scale_gains,
    mw_to_dbm,
    noise_power_mw,
    pathloss_cellular_db,
    pathloss_d2d_db,
    sample_topology,
)

from conftest import line_topology


def test_defaults_match_simulation_table():
    c = ScenarioConfig()
    assert (c.cell_radius_m, c.n_cues, c.n_d2d, c.n_rbs) == (500.0, 10, 10, 10)
    assert (c.p_bs_dbm, c.p_d2d_dbm, c.noise_density_dbm_hz) == (46.0, 13.0, -174.0)
    assert c.max_d2d_dist_m == 30.0
    assert c.cue_sinr_min_db == 0.0 and c.r_neg == -1.0
    assert c.lambda_neighbors == 3 and c.gamma == 0.95
    assert c.obs_dim == 13


@pytest.mark.parametrize("bad", [
    dict(n_cues=5),
    dict(max_d2d_dist_m=600.0),
    dict(max_d2d_dist_m=0.0),
    dict(lambda_neighbors=10),
    dict(gamma=1.0),
    dict(r_neg=0.0),
    dict(rb_bandwidth_hz=0.0),
    dict(shadowing_sigma_db=-1.0),
])
def test_invalid_scenario_rejected(bad):
    with pytest.raises(ValueError):
        ScenarioConfig(**bad)


def test_dbm_conversions():
    assert dbm_to_mw(0.0) == 1.0
    assert dbm_to_mw(46.0) == pytest.approx(39810.7, rel=1e-5)
    assert mw_to_dbm(dbm_to_mw(13.0)) == pytest.approx(13.0)


@pytest.mark.parametrize("d_km,expected", [(1.0, 128.1), (0.5, 116.78), (0.1, 90.5)])
def test_cellular_pathloss(d_km, expected):
    assert pathloss_cellular_db(d_km) == pytest.approx(expected, abs=0.01)


@pytest.mark.parametrize("d_km,expected", [(1.0, 148.0), (0.03, 87.08), (0.01, 68.0)])
def test_d2d_pathloss(d_km, expected):
    assert pathloss_d2d_db(d_km) == pytest.approx(expected, abs=0.01)


def test_pathloss_distance_clamp():
    assert pathloss_cellular_db(0.0) == pathloss_cellular_db(0.001)
    assert np.isfinite(pathloss_d2d_db(0.0))


def test_noise_power():
    assert noise_power_mw(-174.0, 180e3) == pytest.approx(7.16e-13, rel=0.01)
    assert mw_to_dbm(noise_power_mw(-174.0, 180e3)) == pytest.approx(-121.45, abs=0.01)
    assert mw_to_dbm(noise_power_mw(-174.0, 1.0)) == pytest.approx(-174.0)
    assert mw_to_dbm(noise_power_mw(-100.0, 10.0)) == pytest.approx(-90.0)


def test_gain_at_one_km():
    cfg = ScenarioConfig(n_d2d=1, n_cues=1, n_rbs=1, lambda_neighbors=0, fading_enabled=False)
    topo = line_topology([0.0], cue_x=[1000.0])
    g = compute_gains(topo, cfg)
    assert g.g_bc[0] == pytest.approx(10 ** -12.81, rel=1e-9)
    assert g.g_bc[0] == pytest.approx(1.55e-13, rel=0.01)


def test_gains_pure_without_fading():
    cfg = ScenarioConfig(fading_enabled=False)
    topo = sample_topology(cfg, make_stream(3, "topology"))
    a, b = compute_gains(topo, cfg), compute_gains(topo, cfg)
    for f in ("g_bc", "g_tr", "g_tc", "g_br", "g_trx"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_fading_unit_mean():
    cfg = ScenarioConfig()
    topo = sample_topology(cfg, make_stream(0, "topology"))
    base = large_scale_gains(topo, cfg)
    stream = make_stream(0, "fade")
    draws = np.concatenate([draw_fading(base, stream).g_trx.ravel() for _ in range(1000)])
    assert draws.size == 100_000
    assert abs(draws.mean() - 1.0) <= 0.02


def test_shadowing_changes_gains_only_when_enabled():
    cfg = ScenarioConfig(fading_enabled=False)
    topo = sample_topology(cfg, make_stream(1, "topology"))
    plain = large_scale_gains(topo, cfg, make_stream(1, "shadow"))
    shadowed = large_scale_gains(topo, cfg.with_(shadowing_sigma_db=8.0), make_stream(1, "shadow"))
    assert np.array_equal(plain.g_tr, large_scale_gains(topo, cfg).g_tr)
    assert not np.allclose(plain.g_tr, shadowed.g_tr)


def test_pair_distance_bound():
    cfg = ScenarioConfig(max_d2d_dist_m=30.0)
    for s in range(20):
        topo = sample_topology(cfg, make_stream(s, "topology"))
        d = np.hypot(*(topo.d2d_tx_pos - topo.d2d_rx_pos).T)
        assert np.all(d <= 30.0)


def test_topology_deterministic():
    cfg = ScenarioConfig()
    a = sample_topology(cfg, make_stream(9, "topology"))
    b = sample_topology(cfg, make_stream(9, "topology"))
    for f in ("cue_pos", "d2d_tx_pos", "d2d_rx_pos", "cue_rb"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_larger_topology_extends_smaller():
    small = sample_topology(ScenarioConfig(n_d2d=4), make_stream(2, "topology"))
    big = sample_topology(ScenarioConfig(n_d2d=10), make_stream(2, "topology"))
    assert np.array_equal(big.d2d_tx_pos[:4], small.d2d_tx_pos)
    assert np.array_equal(big.cue_pos, small.cue_pos)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), n=st.integers(1, 12), radius=st.floats(100.0, 2000.0))
def test_topology_invariants(seed, n, radius):
    cfg = ScenarioConfig(n_d2d=n, lambda_neighbors=0, cell_radius_m=radius)
    topo = sample_topology(cfg, make_stream(seed, "topology"))
    for pts in (topo.cue_pos, topo.d2d_tx_pos, topo.d2d_rx_pos):
        assert np.all(np.hypot(pts[:, 0], pts[:, 1]) <= radius + 1e-9)
    assert np.all(np.hypot(*(topo.d2d_tx_pos - topo.d2d_rx_pos).T) <= cfg.max_d2d_dist_m + 1e-9)
    assert sorted(topo.cue_rb.tolist()) == list(range(cfg.n_rbs))
    g = compute_gains(topo, cfg, make_stream(seed, "channel"))
    for f in ("g_bc", "g_tr", "g_tc", "g_br", "g_trx"):
        arr = getattr(g, f)
        assert np.all(np.isfinite(arr)) and np.all(arr > 0)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(0.001, 5.0), b=st.floats(0.001, 5.0))
def test_pathloss_monotone_above_clamp(a, b):
    if a < b:
        assert pathloss_cellular_db(a) < pathloss_cellular_db(b)
        assert pathloss_d2d_db(a) < pathloss_d2d_db(b)


@settings(max_examples=100, deadline=None)
@given(g=st.floats(1e-20, 1e3))
def test_gain_db_round_trip(g):
    assert dbm_to_mw(mw_to_dbm(g)) == pytest.approx(g, rel=1e-9)


def test_links_are_not_assumed_reciprocal():
    cfg = ScenarioConfig(n_d2d=2, lambda_neighbors=1, fading_enabled=False)
    topo = line_topology([0.0, 100.0], rx_x=[20.0, 110.0], n_cues=10, cue_x=np.linspace(50, 400, 10))
    g = compute_gains(topo, cfg)
    assert g.g_trx[0, 1] != g.g_trx[1, 0]
