"""Regression-driven energy- and deadline-aware placement on a simulated fog fleet."""

from .config import ScenarioConfig, load_config
from .domain import Policy
from .sim import RunResult, run

__all__ = ["Policy", "RunResult", "ScenarioConfig", "load_config", "run"]
__version__ = "0.1.0"
