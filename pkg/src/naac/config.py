"""Run configuration and the flat JSON config document.

A config file is one JSON object whose keys are the union of
:class:`~naac.topo_channel.ScenarioConfig` and :class:`RunConfig` field
names. Missing keys take their defaults; unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .topo_channel import ScenarioConfig

METHODS = ("naac", "ac", "dqn", "qlearning", "random")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    method: str = "naac"
    episodes: int = 500
    slots_per_episode: int = 200
    eval_episodes: int = 20
    master_seed: int = 0
    lambda_override: int | None = None
    hidden: int = 64
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    tau: float = 0.01
    literal_eq12: bool = False
    buffer_capacity: int = 50_000
    batch_size: int = 64
    warmup: int = 1_000
    eps_start: float = 1.0
    eps_end: float = 0.05
    explore_fraction: float = 0.6
    temp_start: float = 1.0
    temp_end: float = 0.5
    q_alpha: float = 0.1
    frozen_topology: bool = False
    output_dir: str = "runs"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        for name in ("episodes", "slots_per_episode", "eval_episodes", "hidden",
                     "buffer_capacity", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.warmup < 0:
            raise ConfigError("warmup must be non-negative")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if self.lambda_override is not None and self.lambda_override < 0:
            raise ConfigError("lambda_override must be non-negative")
        if not 0 <= self.tau <= 1:
            raise ConfigError("tau must lie in [0, 1]")
        if not (0 <= self.eps_end <= 1 and 0 <= self.eps_start <= 1):
            raise ConfigError("exploration rates must lie in [0, 1]")
        if not 0 < self.explore_fraction <= 1:
            raise ConfigError("explore_fraction must lie in (0, 1]")
        if self.temp_start <= 0 or self.temp_end <= 0:
            raise ConfigError("temperatures must be positive")
        if not 0 < self.q_alpha <= 1:
            raise ConfigError("q_alpha must lie in (0, 1]")
        for name in ("actor_lr", "critic_lr", "adam_eps"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)")

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    @property
    def total_slots(self) -> int:
        return self.episodes * self.slots_per_episode


def effective_lambda(scenario: ScenarioConfig, run: RunConfig) -> int:
    if run.method in ("ac",):
        return 0
    return scenario.lambda_neighbors if run.lambda_override is None else run.lambda_override


def _check_types(cls, data: dict) -> dict:
    out = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        v = data[f.name]
        default = f.default
        if isinstance(default, bool):
            if not isinstance(v, bool):
                raise ConfigError(f"{f.name}: expected true/false, got {v!r}")
        elif isinstance(default, int) or f.name == "lambda_override":
            if v is None and f.name == "lambda_override":
                pass
            elif isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{f.name}: expected an integer, got {v!r}")
        elif isinstance(default, float):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{f.name}: expected a number, got {v!r}")
            v = float(v)
        elif isinstance(default, str) and not isinstance(v, str):
            raise ConfigError(f"{f.name}: expected a string, got {v!r}")
        out[f.name] = v
    return out


def configs_from_dict(data: dict) -> tuple[ScenarioConfig, RunConfig]:
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    known = set(ScenarioConfig.field_names()) | {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        scenario = ScenarioConfig(**_check_types(ScenarioConfig, data))
        run = RunConfig(**_check_types(RunConfig, data))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return scenario, run


def load_config(path) -> tuple[ScenarioConfig, RunConfig]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    return configs_from_dict(data)


def config_to_dict(scenario: ScenarioConfig, run: RunConfig) -> dict:
    return {**asdict(scenario), **asdict(run)}


def save_config(path, scenario: ScenarioConfig, run: RunConfig) -> None:
    Path(path).write_text(
        json.dumps(config_to_dict(scenario, run), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
