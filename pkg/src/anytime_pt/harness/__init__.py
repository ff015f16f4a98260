"""Experiment configuration, presets, orchestration and the command line."""

from .config import ExperimentConfig, dump_config, load_config, validate_config
from .presets import get_preset, list_presets, preset_names
from .runner import (ExperimentResult, build, load_run, make_report, report_from_dir,
                     run_experiment, run_once)

__all__ = [
    "ExperimentConfig", "ExperimentResult", "build", "dump_config", "get_preset",
    "list_presets", "load_config", "load_run", "make_report", "preset_names",
    "report_from_dir", "run_experiment", "run_once", "validate_config",
]
