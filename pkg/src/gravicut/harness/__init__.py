"""Experiment harness: configuration, batch runs, sweeps and validation batteries."""
from .config import ConfigError, ExperimentConfig, load_config, parse_seeds, run_stream
from .runner import cmd_run, cmd_sweep
from .validate import run_validation

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_seeds", "run_stream",
           "cmd_run", "cmd_sweep", "run_validation"]
