"""Experiment configuration, sweeps, output files and the command-line tool."""

from .config import ConfigError, ExperimentConfig, load_link_preset, load_preset, parse_config
from .output import emit_csv, emit_plot_data
from .pipeline import evaluate, run_single, simulate_trace
from .sweeps import SweepResult, sweep_dbp_grid, sweep_kappa, sweep_lop

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SweepResult",
    "emit_csv",
    "emit_plot_data",
    "evaluate",
    "load_link_preset",
    "load_preset",
    "parse_config",
    "run_single",
    "simulate_trace",
    "sweep_dbp_grid",
    "sweep_kappa",
    "sweep_lop",
]
