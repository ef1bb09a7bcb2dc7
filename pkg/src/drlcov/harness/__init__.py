"""Experiment runner: config, training loop, multi-seed aggregation, charts."""
from .config import ConfigError, ExperimentConfig, parse_config, parse_config_text, to_toml
from .experiment import AggregateStats, aggregate, run_experiment
from .runner import RunResult, emit_embedding_snapshot, run_training

__all__ = [
    "AggregateStats",
    "ConfigError",
    "ExperimentConfig",
    "RunResult",
    "aggregate",
    "emit_embedding_snapshot",
    "parse_config",
    "parse_config_text",
    "run_experiment",
    "run_training",
    "to_toml",
]
