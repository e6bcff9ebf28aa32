"""Geometric quadrotor control on SE(3) with sliced adaptive-neuro
disturbance learning, a ground-truth simulator and Lyapunov diagnostics."""

from .config import ConfigError, ScenarioConfig, load_config
from .harness import Metrics, SimDiverged, run_scenario
from .sanm import Gains, KnownJ, UnknownJ
from .telemetry import SimLog, read_log, write_log
from .vehicle import VehicleParams

__version__ = "0.1.0"

__all__ = ["ConfigError", "Gains", "KnownJ", "Metrics", "ScenarioConfig", "SimDiverged",
           "SimLog", "UnknownJ", "VehicleParams", "load_config", "read_log", "run_scenario",
           "write_log"]
