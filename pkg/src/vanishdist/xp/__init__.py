"""Experiment runner and command line interface."""
from .cli import run_cli
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .runner import (
    RefusedWithoutDisplacement,
    RunReport,
    calibrate,
    check_displacement,
    displacement_energy_bound,
    find_j0,
    make_probes,
    sweep,
    verify_displacement,
)

__all__ = [
    "run_cli", "ConfigError", "ExperimentConfig", "load_config", "parse_config",
    "RefusedWithoutDisplacement", "RunReport", "calibrate", "check_displacement",
    "displacement_energy_bound", "find_j0", "make_probes", "sweep", "verify_displacement",
]
