"""Experiment configuration: TOML in, canonical TOML out.

Unknown sections or keys are rejected, missing keys take documented
defaults (some depend on the chosen environment), and every type or range
problem is reported with its ``section.key`` path.
"""
from __future__ import annotations

import dataclasses
import json
import math
import sys
import typing
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..agent import DQNConfig
from ..coverage import CoverageConfig
from ..embed import TSNEConfig
from ..envs import CartpoleConfig, HighwayConfig, HighwayRewardParams
from ..maximizer import SchedulerConfig

ENVIRONMENTS = ("cartpole", "highway")

ENV_DEFAULTS = {
    "cartpole": {
        "run.episodes": 600,
        "run.seeds": list(range(10)),
        "agent.hidden": [64, 64],
        "maximizer.rrt_dist": 0.05,
    },
    "highway": {
        "run.episodes": 300,
        "run.seeds": [0, 1, 2],
        "agent.hidden": [128, 128],
        "maximizer.rrt_dist": 5.0,
    },
}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class RunSection:
    env: str = "cartpole"
    episodes: typing.Optional[int] = None
    seeds: typing.Optional[list[int]] = None
    out_dir: str = "runs"
    workers: int = 1
    save_states: bool = True


@dataclass
class CartpoleSection:
    theta_limit_deg: float = 15.0
    x_limit: float = 2.4
    max_steps: int = 500
    integrator: str = "rk4"


@dataclass
class HighwaySection:
    lanes: int = 4
    vehicles: int = 5
    v_min: float = 20.0
    v_max: float = 30.0
    reward_a: float = 0.4
    reward_b: float = 1.0
    horizon: int = 40
    substeps: int = 15


@dataclass
class AgentSection:
    hidden: typing.Optional[list[int]] = None
    learning_rate: float = 1e-3
    gamma: float = 0.99
    batch_size: int = 64
    buffer_capacity: int = 50_000
    target_sync: int = 500
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_episodes: int = 200
    grad_clip: float = 10.0


@dataclass
class EmbedSection:
    perplexity: float = 30.0
    iterations: int = 500
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    max_samples: int = 2000


@dataclass
class CoverageSection:
    grid_cells: int = 50
    batch_episodes: int = 100


@dataclass
class MaximizerSection:
    epsilon: float = 1.0
    epsilon_decay: float = 0.998
    rrt_dist: typing.Optional[float] = None
    sigma_fraction: float = 0.02


SECTIONS = {
    "run": RunSection,
    "cartpole": CartpoleSection,
    "highway": HighwaySection,
    "agent": AgentSection,
    "embed": EmbedSection,
    "coverage": CoverageSection,
    "maximizer": MaximizerSection,
}

# (predicate, message) per key path; evaluated after defaults are resolved.
_RANGES = {
    "run.env": (lambda v: v in ENVIRONMENTS, f"must be one of {ENVIRONMENTS}"),
    "run.episodes": (lambda v: v >= 1, "must be >= 1"),
    "run.seeds": (lambda v: len(v) >= 1 and len(set(v)) == len(v), "must be a non-empty list of distinct seeds"),
    "run.workers": (lambda v: v >= 1, "must be >= 1"),
    "cartpole.theta_limit_deg": (lambda v: 0 < v < 90, "must be in (0, 90)"),
    "cartpole.x_limit": (lambda v: v > 0, "must be > 0"),
    "cartpole.max_steps": (lambda v: v >= 1, "must be >= 1"),
    "cartpole.integrator": (lambda v: v in ("rk4", "euler"), "must be 'rk4' or 'euler'"),
    "highway.lanes": (lambda v: v >= 2, "must be >= 2"),
    "highway.vehicles": (lambda v: v >= 2, "must be >= 2"),
    "highway.v_min": (lambda v: v >= 0, "must be >= 0"),
    "highway.reward_a": (lambda v: v >= 0, "must be >= 0"),
    "highway.reward_b": (lambda v: v >= 0, "must be >= 0"),
    "highway.horizon": (lambda v: v >= 1, "must be >= 1"),
    "highway.substeps": (lambda v: v >= 1, "must be >= 1"),
    "agent.hidden": (lambda v: len(v) >= 1 and all(h >= 1 for h in v), "must list positive layer widths"),
    "agent.learning_rate": (lambda v: v > 0, "must be > 0"),
    "agent.gamma": (lambda v: 0 <= v <= 1, "must be in [0, 1]"),
    "agent.batch_size": (lambda v: v >= 1, "must be >= 1"),
    "agent.buffer_capacity": (lambda v: v >= 1, "must be >= 1"),
    "agent.target_sync": (lambda v: v >= 1, "must be >= 1"),
    "agent.eps_start": (lambda v: 0 <= v <= 1, "must be in [0, 1]"),
    "agent.eps_end": (lambda v: 0 <= v <= 1, "must be in [0, 1]"),
    "agent.eps_decay_episodes": (lambda v: v >= 0, "must be >= 0"),
    "agent.grad_clip": (lambda v: v > 0, "must be > 0"),
    "embed.perplexity": (lambda v: v >= 1, "must be >= 1"),
    "embed.iterations": (lambda v: v >= 1, "must be >= 1"),
    "embed.learning_rate": (lambda v: v > 0, "must be > 0"),
    "embed.early_exaggeration": (lambda v: v >= 1, "must be >= 1"),
    "embed.max_samples": (lambda v: v >= 4, "must be >= 4"),
    "coverage.grid_cells": (lambda v: v >= 2, "must be >= 2"),
    "coverage.batch_episodes": (lambda v: v >= 1, "must be >= 1"),
    "maximizer.epsilon": (lambda v: 0 <= v <= 1, "must be in [0, 1]"),
    "maximizer.epsilon_decay": (lambda v: 0 < v <= 1, "must be in (0, 1]"),
    "maximizer.rrt_dist": (lambda v: v > 0, "must be > 0"),
    "maximizer.sigma_fraction": (lambda v: v >= 0, "must be >= 0"),
}


@dataclass
class ExperimentConfig:
    run: RunSection = field(default_factory=RunSection)
    cartpole: CartpoleSection = field(default_factory=CartpoleSection)
    highway: HighwaySection = field(default_factory=HighwaySection)
    agent: AgentSection = field(default_factory=AgentSection)
    embed: EmbedSection = field(default_factory=EmbedSection)
    coverage: CoverageSection = field(default_factory=CoverageSection)
    maximizer: MaximizerSection = field(default_factory=MaximizerSection)

    # builders for the component configs
    def cartpole_config(self) -> CartpoleConfig:
        c = self.cartpole
        return CartpoleConfig(theta_limit_deg=c.theta_limit_deg, x_limit=c.x_limit,
                              max_steps=c.max_steps, integrator=c.integrator)

    def highway_config(self) -> HighwayConfig:
        h = self.highway
        reward = HighwayRewardParams(a=h.reward_a, b=h.reward_b, v_min=h.v_min, v_max=h.v_max)
        return HighwayConfig(lanes=h.lanes, vehicles=h.vehicles, reward=reward, horizon=h.horizon,
                             substeps=h.substeps)

    def dqn_config(self) -> DQNConfig:
        a = self.agent
        return DQNConfig(hidden=tuple(a.hidden), learning_rate=a.learning_rate, gamma=a.gamma,
                         batch_size=a.batch_size, buffer_capacity=a.buffer_capacity,
                         target_sync=a.target_sync, eps_start=a.eps_start, eps_end=a.eps_end,
                         eps_decay_episodes=a.eps_decay_episodes, grad_clip=a.grad_clip)

    def coverage_config(self) -> CoverageConfig:
        e = self.embed
        tsne = TSNEConfig(perplexity=e.perplexity, iterations=e.iterations, learning_rate=e.learning_rate,
                          early_exaggeration=e.early_exaggeration, momentum_switch=e.iterations // 2)
        return CoverageConfig(grid_cells=self.coverage.grid_cells,
                              batch_episodes=self.coverage.batch_episodes,
                              max_samples=e.max_samples, tsne=tsne)

    def scheduler_config(self) -> SchedulerConfig:
        m = self.maximizer
        return SchedulerConfig(epsilon=m.epsilon, epsilon_decay=m.epsilon_decay, rrt_step=m.rrt_dist)


def _coerce(path: str, value, hint):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union and type(None) in args:
        (hint,) = [a for a in args if a is not type(None)]
        origin, args = typing.get_origin(hint), typing.get_args(hint)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {type(value).__name__}")
        return [_coerce(f"{path}[{k}]", v, args[0]) for k, v in enumerate(value)]
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(path, "must be finite")
        return value
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    raise TypeError(f"unsupported config type {hint} at {path}")


def config_from_dict(data: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for section, values in data.items():
        if section not in SECTIONS:
            raise ConfigError(section, "unknown section")
        if not isinstance(values, dict):
            raise ConfigError(section, "expected a table of keys")
        target = getattr(cfg, section)
        hints = typing.get_type_hints(type(target))
        for key, value in values.items():
            path = f"{section}.{key}"
            if key not in hints:
                raise ConfigError(path, "unknown key")
            setattr(target, key, _coerce(path, value, hints[key]))
    if cfg.run.env not in ENVIRONMENTS:
        raise ConfigError("run.env", f"must be one of {ENVIRONMENTS}")
    for path, default in ENV_DEFAULTS[cfg.run.env].items():
        section, key = path.split(".")
        target = getattr(cfg, section)
        if getattr(target, key) is None:
            setattr(target, key, list(default) if isinstance(default, list) else default)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    for path, (ok, message) in _RANGES.items():
        section, key = path.split(".")
        if not ok(getattr(getattr(cfg, section), key)):
            raise ConfigError(path, message)
    if cfg.highway.v_max <= cfg.highway.v_min:
        raise ConfigError("highway.v_max", "must exceed highway.v_min")
    if cfg.agent.eps_end > cfg.agent.eps_start:
        raise ConfigError("agent.eps_end", "must not exceed agent.eps_start")
    if cfg.run.episodes < cfg.coverage.batch_episodes:
        raise ConfigError("run.episodes", "must be >= coverage.batch_episodes")


def parse_config(source=None) -> ExperimentConfig:
    """Parse a TOML file path (or ``None`` for all defaults)."""
    if source is None:
        return config_from_dict({})
    text = Path(source).read_text()
    return parse_config_text(text)


def parse_config_text(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError("<toml>", str(err)) from None
    return config_from_dict(data)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {value!r}")


def to_toml(cfg: ExperimentConfig) -> str:
    """Canonical form: every section and key in declaration order."""
    blocks = []
    for section in SECTIONS:
        target = getattr(cfg, section)
        lines = [f"[{section}]"]
        for f in dataclasses.fields(target):
            lines.append(f"{f.name} = {_format(getattr(target, f.name))}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def apply_overrides(cfg: ExperimentConfig, overrides: dict[str, object]) -> ExperimentConfig:
    """Return a new config with ``{"section.key": value}`` overrides applied."""
    data = tomllib.loads(to_toml(cfg))
    env_changed = "run.env" in overrides and overrides["run.env"] != cfg.run.env
    if env_changed:
        # re-derive the environment-dependent defaults for the new env
        for path in ENV_DEFAULTS[cfg.run.env]:
            section, key = path.split(".")
            data[section].pop(key, None)
    for path, value in overrides.items():
        if "." not in path:
            raise ConfigError(path, "override keys must look like section.key")
        section, key = path.split(".", 1)
        data.setdefault(section, {})[key] = value
    return config_from_dict(data)


def parse_override(text: str) -> tuple[str, object]:
    """``section.key=value`` with the value read as a TOML literal (bare words as strings)."""
    if "=" not in text:
        raise ConfigError(text, "expected section.key=value")
    path, raw = (part.strip() for part in text.split("=", 1))
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return path, value
