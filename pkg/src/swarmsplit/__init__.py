"""Seeded simulator of distributed split computing in mobile UAV swarms."""

from .core import ConfigError, ExitLabel, ModelProfile, SimConfig, Strategy, validate_config
from .engine import RunResult, Simulation, run_simulation

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ExitLabel",
    "ModelProfile",
    "RunResult",
    "SimConfig",
    "Simulation",
    "Strategy",
    "run_simulation",
    "validate_config",
]
