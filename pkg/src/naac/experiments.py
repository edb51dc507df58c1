"""Training, greedy evaluation, N-sweeps and the metrics CSV."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from .agents.training import NetworkPolicy, RandomPolicy, TablePolicy, TrainResult, train
from .config import METHODS, RunConfig, save_config
from .env import D2DEnv
from .neural import load_params, save_params
from .seeding import derive_stream_seed, make_stream
from .topo_channel import ScenarioConfig, sample_topology

log = logging.getLogger(__name__)

CSV_HEADER = (
    "method", "seed", "n_d2d", "episode", "total_reward",
    "outage_prob", "sum_rate_bps_hz", "mean_critic_loss",
)


class CheckpointError(FileNotFoundError):
    pass


@dataclass
class MetricsRow:
    method: str
    seed: int
    n_d2d: int
    episode: int | str  # episode index or "eval"
    total_reward: float
    outage_prob: float
    sum_rate_bps_hz: float
    mean_critic_loss: float

    def sort_key(self):
        ep = self.episode
        return (self.method, self.n_d2d, self.seed, (1, 0) if ep == "eval" else (0, ep))


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".9g")


def format_csv(rows) -> str:
    lines = [",".join(CSV_HEADER)]
    lines += [",".join(_fmt(v) for v in astuple(r)) for r in rows]
    return "\n".join(lines) + "\n"


def emit_csv(rows, path) -> Path:
    """Header plus one line per row, 9 significant digits, ``\\n`` line ends, UTF-8."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(format_csv(rows))
    return path


def parse_csv(path) -> list[MetricsRow]:
    with open(path, encoding="utf-8", newline="") as f:
        text = f.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CSV_HEADER:
        raise ValueError(f"unexpected header {header}")
    rows = []
    for rec in reader:
        method, seed, n, ep, *vals = rec
        rows.append(
            MetricsRow(method, int(seed), int(n), ep if ep == "eval" else int(ep),
                       *(float(v) for v in vals))
        )
    return rows


# -- training -----------------------------------------------------------------


@dataclass
class TrainingOutput:
    rows: list[MetricsRow]
    result: TrainResult
    checkpoint_paths: list[Path]


def run_training(scenario: ScenarioConfig, run: RunConfig, out_dir=None) -> TrainingOutput:
    """Train ``run.method``; one row per episode and (unless random) per-agent checkpoints."""
    result = train(scenario, run)
    rows = [
        MetricsRow(run.method, run.master_seed, scenario.n_d2d, s.episode, s.total_reward,
                   s.outage_prob, s.sum_rate, s.mean_critic_loss)
        for s in result.stats
    ]
    paths = []
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, obj in result.learner.checkpoints().items():
            save_params(obj, out / name)
            paths.append(out / name)
    return TrainingOutput(rows, result, paths)


def load_policy(method: str, scenario: ScenarioConfig, checkpoint_dir):
    """Rebuild a greedy execution policy from ``{method}_agent{i}.params`` files."""
    if method == "random":
        return RandomPolicy(scenario.n_rbs)
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    objs = []
    for i in range(scenario.n_d2d):
        path = Path(checkpoint_dir) / f"{method}_agent{i}.params"
        if not path.is_file():
            raise CheckpointError(f"missing checkpoint {path}")
        objs.append(load_params(path))
    if method == "qlearning":
        return TablePolicy(np.stack(objs) if objs else np.zeros((0, 0, scenario.n_rbs)), scenario.n_rbs)
    return NetworkPolicy(objs)


# -- evaluation ---------------------------------------------------------------


def run_eval(scenario: ScenarioConfig, run: RunConfig, policy=None, checkpoint_dir=None) -> MetricsRow:
    """Greedy execution on ``run.eval_episodes`` fresh topologies; nothing is updated.

    Evaluation topologies and fading come from streams tagged separately
    from training, so they never coincide with training draws.
    """
    if policy is None:
        if run.method != "random" and checkpoint_dir is None:
            raise CheckpointError(f"{run.method} evaluation needs a checkpoint directory")
        policy = load_policy(run.method, scenario, checkpoint_dir)
    N, M, T = scenario.n_d2d, scenario.n_cues, run.slots_per_episode
    streams = [make_stream(run.master_seed, "eval_explore", 0, i) for i in range(N)]
    outages, rate_sum, reward_sum = 0, 0.0, 0.0
    for ep in range(run.eval_episodes):
        topo = sample_topology(scenario, make_stream(run.master_seed, "eval_topology", ep))
        env = D2DEnv(scenario, topo, stream=make_stream(run.master_seed, "eval_channel", ep))
        obs = env.reset()
        for _ in range(T):
            out = env.step(policy.actions(obs, streams))
            outages += int(np.sum(out.cue_outage_flags))
            rate_sum += out.sum_rate_bps_hz
            reward_sum += float(np.sum(out.rewards))
            obs = out.next_obs
    slots = run.eval_episodes * T
    return MetricsRow(
        method=run.method,
        seed=run.master_seed,
        n_d2d=N,
        episode="eval",
        total_reward=reward_sum / run.eval_episodes,
        outage_prob=outages / (M * slots),
        sum_rate_bps_hz=rate_sum / slots,
        mean_critic_loss=float("nan"),
    )


# -- sweeps -------------------------------------------------------------------


def cell_seed(master_seed: int, seed_index: int) -> int:
    """Master seed of sweep replicate ``seed_index``; shared by all methods and N."""
    return derive_stream_seed(master_seed, "sweep", 0, seed_index)


def cell_configs(scenario: ScenarioConfig, run: RunConfig, method: str, n: int, seed_index: int):
    lam = min(scenario.lambda_neighbors, max(n - 1, 0))
    sc = scenario.with_(n_d2d=n, lambda_neighbors=lam)
    lo = run.lambda_override
    rc = run.with_(
        method=method,
        master_seed=cell_seed(run.master_seed, seed_index),
        lambda_override=None if lo is None else min(lo, max(n - 1, 0)),
    )
    return sc, rc


def run_cell(scenario: ScenarioConfig, run: RunConfig) -> MetricsRow:
    if run.method == "random":
        policy = RandomPolicy(scenario.n_rbs)
    else:
        policy = train(scenario, run).learner.policy()
    return run_eval(scenario, run, policy=policy)


def _run_cell_to_file(args):
    scenario, run, path = args
    row = run_cell(scenario, run)
    if path is not None:
        emit_csv([row], path)
    return row


def _threads() -> int:
    raw = os.environ.get("NAAC_THREADS", "").strip()
    if not raw:
        return 0
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"NAAC_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ValueError("NAAC_THREADS must be non-negative")
    return n


def run_sweep(
    scenario: ScenarioConfig,
    run: RunConfig,
    n_list,
    methods,
    seeds: int,
    out_dir=None,
) -> list[MetricsRow]:
    """Train then evaluate every (method, N, seed) cell; rows sorted by (method, N, seed).

    Cells are independent. With ``NAAC_THREADS`` > 0 they run in a process
    pool; each cell writes a private staging file that is merged at the end.
    """
    n_list = [int(n) for n in n_list]
    if any(n < 1 for n in n_list):
        raise ValueError("n_list values must be at least 1")
    if seeds < 1:
        raise ValueError("seeds must be at least 1")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    staging = None if out_dir is None else Path(out_dir) / "staging"
    if staging is not None:
        staging.mkdir(parents=True, exist_ok=True)
    jobs = []
    for m in methods:
        for n in n_list:
            for s in range(seeds):
                sc, rc = cell_configs(scenario, run, m, n, s)
                path = None if staging is None else staging / f"{m}_n{n}_s{s}.csv"
                jobs.append((sc, rc, path))
    workers = _threads()
    if workers > 0:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell_to_file, jobs))
    else:
        rows = []
        for job in jobs:
            rows.append(_run_cell_to_file(job))
            log.info("sweep cell %s N=%d done", job[1].method, job[0].n_d2d)
    if staging is not None:
        rows = [parse_csv(p)[0] for _, _, p in jobs]
    rows.sort(key=MetricsRow.sort_key)
    if out_dir is not None:
        emit_csv(rows, Path(out_dir) / "sweep.csv")
    return rows


def seed_means(rows, field: str) -> dict:
    """Mean of ``field`` per (method, n_d2d)."""
    acc: dict = {}
    for r in rows:
        acc.setdefault((r.method, r.n_d2d), []).append(getattr(r, field))
    return {k: float(np.mean(v)) for k, v in acc.items()}


def write_run_artifacts(out_dir, scenario: ScenarioConfig, run: RunConfig, rows, name: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(out / "config.json", scenario, run)
    return emit_csv(rows, out / name)


def rows_equal(a: MetricsRow, b: MetricsRow) -> bool:
    """Field-wise equality that treats NaN as equal to NaN."""
    for f in fields(MetricsRow):
        x, y = getattr(a, f.name), getattr(b, f.name)
        if isinstance(x, float) and isinstance(y, float) and math.isnan(x) and math.isnan(y):
            continue
        if x != y:
            return False
    return True
