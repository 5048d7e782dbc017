"""Semantic navigation in partially observed grid worlds.

A confidence grid steered by goal-region predictions, frontier exploration
and A* planning, with baselines, SPL/SR evaluation and renderers.
"""

from .agent import AgentConfig, Policy, extract_goal, run_frontier, run_frontier_nearest, run_ours
from .belief import ConfidenceGrid
from .evaluation import EpisodeRecord, spl, success_rate
from .generators import Family, generate_environment
from .gridworld import Direction, Environment, GoalSpec, load_environment, make_environment
from .predictor import RuleBasedPredictor

__version__ = "0.1.0"

__all__ = [
    "AgentConfig",
    "ConfidenceGrid",
    "Direction",
    "Environment",
    "EpisodeRecord",
    "Family",
    "GoalSpec",
    "Policy",
    "RuleBasedPredictor",
    "extract_goal",
    "generate_environment",
    "load_environment",
    "make_environment",
    "run_frontier",
    "run_frontier_nearest",
    "run_ours",
    "spl",
    "success_rate",
]
