"""Seeded sweep engine: configuration, runners, CSV output and the CLI."""

from pilotsim.experiments.config import ConfigError, ExperimentConfig
from pilotsim.experiments.engine import ResultRow, derive_stream, run_experiment, write_csv

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ResultRow",
    "derive_stream",
    "run_experiment",
    "write_csv",
]
