"""Config-driven experiment runner, report plots, and the command-line interface."""

from .config import Cell, ExperimentConfig, parse_config_text, read_config
from .runner import CellResult, StudyReport, paired_ratio, run_study, run_table1
from .plots import plot_report

__all__ = [
    "Cell",
    "ExperimentConfig",
    "read_config",
    "parse_config_text",
    "CellResult",
    "StudyReport",
    "paired_ratio",
    "run_study",
    "run_table1",
    "plot_report",
]
