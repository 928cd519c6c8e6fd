"""Marker-based crowd simulation with fast-forward frame skipping, personality-driven
groups and fog-of-war suspension."""
from .engine import Agent, AgentState, SimState, init_state, run_continuous, step
from .estimators import FastForwardRegressor, OceanBehaviorTransformer
from .ffa import JumpRecord, JumpRequest, fast_forward
from .fog import FogController, VisionSource, run_fog
from .harness import ExperimentPlan, run, run_suite
from .metrics import avg_error, mean_dif, relative_dif, simulation_stats
from .pathplan import Path, advance_path, astar, plan_path, point_at_distance
from .scenario import Scenario, load_scenario, parse_scenario, serialize_scenario

__all__ = [
    "Agent", "AgentState", "ExperimentPlan", "FastForwardRegressor", "FogController", "JumpRecord",
    "JumpRequest", "OceanBehaviorTransformer", "Path", "Scenario", "SimState", "VisionSource",
    "advance_path", "astar", "avg_error", "fast_forward", "init_state", "load_scenario", "mean_dif",
    "parse_scenario", "plan_path", "point_at_distance", "relative_dif", "run", "run_continuous",
    "run_fog", "run_suite", "serialize_scenario", "simulation_stats", "step",
]

__version__ = "0.1.0"
