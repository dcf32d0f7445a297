"""Experiment configuration, sweep runner, persistence and acceptance recipes."""
from .config import KINDS, ExperimentConfig, load_config
from .runner import RunManifest, run

__all__ = ["KINDS", "ExperimentConfig", "RunManifest", "load_config", "run"]
