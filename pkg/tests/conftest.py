import numpy as np
import pytest

from naac.topo_channel import ChannelGains, ScenarioConfig, Topology


def random_gains(rng, n, m, noise_mw=7.16e-13):
    """Gains spread over a realistic dB range, independent of any geometry."""
    g = lambda *shape: 10.0 ** rng.uniform(-14, -6, shape)  # noqa: E731
    return ChannelGains(
        g_bc=g(m), g_tr=g(n), g_tc=g(n, m), g_br=g(n), g_trx=g(n, n),
        noise_mw=noise_mw, g_bt=g(n),
    )


def line_topology(tx_x, rx_x=None, n_cues=1, cue_x=None):
    """Pairs laid out on the x axis; receivers colocated with transmitters by default."""
    tx_x = np.asarray(tx_x, dtype=float)
    rx_x = tx_x if rx_x is None else np.asarray(rx_x, dtype=float)
    cue_x = np.full(n_cues, 200.0) if cue_x is None else np.asarray(cue_x, dtype=float)
    to2 = lambda x: np.stack([x, np.zeros_like(x)], axis=1)  # noqa: E731
    return Topology(
        bs_pos=np.zeros(2), cue_pos=to2(cue_x), d2d_tx_pos=to2(tx_x),
        d2d_rx_pos=to2(rx_x), cue_rb=np.arange(n_cues),
    )


def small_scenario(n, k, **kw):
    kw.setdefault("lambda_neighbors", min(1, max(n - 1, 0)))
    return ScenarioConfig(n_d2d=n, n_cues=k, n_rbs=k, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run even when output is captured
ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, passed: bool, detail: str = "") -> bool:
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else ""))
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
