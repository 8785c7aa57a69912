"""Deterministic swarm simulator built from local rules: allowable-region
confinement, relative-neighborhood cohesion, attraction/repulsion task
allocation, peristaltic random steps and broadcast steering."""

from .dynamics import InfluenceConfig, Policy, Task
from .engine import ScenarioConfig, SimulationState, StepMetrics, init_scenario, run_scenario, step_simulation
from .errors import ConfigError, ConnectivityLost, ContractError, InvariantViolation
from .steering import SteeringConfig, SteeringMode

__all__ = [
    "ConfigError", "ConnectivityLost", "ContractError", "InfluenceConfig", "InvariantViolation",
    "Policy", "ScenarioConfig", "SimulationState", "StepMetrics", "SteeringConfig", "SteeringMode",
    "Task", "init_scenario", "run_scenario", "step_simulation",
]
__version__ = "0.1.0"
