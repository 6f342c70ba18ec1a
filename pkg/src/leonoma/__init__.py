"""Seedable LEO-constellation NOMA simulator and optimization toolkit."""

from .config import ScenarioConfig, load_config
from .engine import MetricsReport, SolutionReport, Strategy, parse_strategy, run

__all__ = [
    "ScenarioConfig",
    "load_config",
    "MetricsReport",
    "SolutionReport",
    "Strategy",
    "parse_strategy",
    "run",
]

__version__ = "0.1.0"
