"""Observer-based leader-follower tracking for high-order multi-agent systems."""

from .errors import (
    Diverged,
    HotrackError,
    NotHurwitz,
    ParseError,
    ScenarioValidationError,
    StepTooLarge,
)
from .graph import Topology, build_topology, chain_topology, graph_matrices, leader_globally_reachable
from .models import LeaderInput, Nonlinearity, cosine_sum, custom_nonlinearity, no_nonlinearity
from .observers import GainSet
from .scenario_io import dump_scenario, load_scenario, parse_scenario
from .sim import Scenario, TraceLog, error_metrics, integrate, reference_scenario
from .stability import StabilityReport, certify, certify_linear, certify_nonlinear

__all__ = [
    "Diverged", "GainSet", "HotrackError", "LeaderInput", "Nonlinearity", "NotHurwitz",
    "ParseError", "Scenario", "ScenarioValidationError", "StabilityReport", "StepTooLarge",
    "Topology", "TraceLog", "build_topology", "certify", "certify_linear", "certify_nonlinear",
    "chain_topology", "cosine_sum", "custom_nonlinearity", "dump_scenario", "error_metrics",
    "graph_matrices", "integrate", "leader_globally_reachable", "load_scenario",
    "no_nonlinearity", "parse_scenario", "reference_scenario",
]
__version__ = "0.1.0"
