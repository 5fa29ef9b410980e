"""Experiment orchestration: configs, runs, the acceptance suite and the CLI."""

from .config import ConfigError, ExperimentConfig, load_config, validate
from .runner import RunManifest, run

__all__ = ["ConfigError", "ExperimentConfig", "RunManifest", "load_config", "run", "validate"]
