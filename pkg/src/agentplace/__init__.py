"""Placement and migration of AI agents on capacity-constrained edge servers."""

from .aco import AcoParams, MigrationPlan, alm_solve, alp_search, alp_solve
from .baselines import greedy_place, polling_place, random_place
from .costs import CostBreakdown, NetGain, ead_objective, net_gain, total_latency
from .errors import AgentPlaceError, Infeasible, ParseError, ValidationError
from .experiment import run_experiment
from .model import (
    Agent,
    CommEvent,
    EdgeServer,
    EdgeSystem,
    NetworkModel,
    ObjectiveWeights,
    Placement,
    ResourceVector,
    Task,
)
from .oracle import best_migration, brute_force_optimal
from .policies import make_policy
from .refine import LocalSearchRefiner, RemoteRefiner, refine
from .scenario import Scenario, generate_scenario, load_scenario, save_scenario
from .sim import SimConfig, simulate

__all__ = [
    "AcoParams", "Agent", "AgentPlaceError", "CommEvent", "CostBreakdown", "EdgeServer", "EdgeSystem",
    "Infeasible", "LocalSearchRefiner", "MigrationPlan", "NetGain", "NetworkModel", "ObjectiveWeights",
    "ParseError", "Placement", "RemoteRefiner", "ResourceVector", "Scenario", "SimConfig", "Task",
    "ValidationError", "alm_solve", "alp_search", "alp_solve", "best_migration", "brute_force_optimal",
    "ead_objective", "generate_scenario", "greedy_place", "load_scenario", "make_policy", "net_gain",
    "polling_place", "random_place", "refine", "run_experiment", "save_scenario", "simulate", "total_latency",
]
