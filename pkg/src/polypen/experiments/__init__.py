"""Experiment harness: grid runs, CSV/SVG emission, and the command line."""

from .config import ExperimentConfig, load_config, parse_experiment, parse_task
from .output import CSV_COLUMNS, emit_csv, emit_plot, read_result_csv, write_metadata
from .runner import ResultRow, ResultTable, limit_moments, run_experiment
from .cli import cli_main

__all__ = [
    "ExperimentConfig",
    "load_config",
    "parse_experiment",
    "parse_task",
    "ResultRow",
    "ResultTable",
    "limit_moments",
    "run_experiment",
    "CSV_COLUMNS",
    "emit_csv",
    "emit_plot",
    "read_result_csv",
    "write_metadata",
    "cli_main",
]
