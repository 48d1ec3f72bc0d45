"""Energy-minimized hybrid over-the-air computation and edge offloading."""

from .baselines import channel_inversion, equal_offloading, run_method
from .bcd import InfeasibleInstanceError, IterationTrace, complexity_estimate, initialize_feasible, run_bcd
from .config import DESK, PAPER, ConfigError, SystemConfig, get_preset, load_config
from .model import DecisionSet, EnergyBreakdown, FeasibilityReport, check_feasibility, energy, mse_analytic
from .scenario import Scenario, build_scenario

__version__ = "0.1.0"

__all__ = [
    "DESK", "PAPER", "ConfigError", "DecisionSet", "EnergyBreakdown", "FeasibilityReport",
    "InfeasibleInstanceError", "IterationTrace", "Scenario", "SystemConfig", "build_scenario",
    "channel_inversion", "check_feasibility", "complexity_estimate", "energy", "equal_offloading",
    "get_preset", "initialize_feasible", "load_config", "mse_analytic", "run_bcd", "run_method",
]
