"""Sophisticated learning, sophisticated inference and Bayes-adaptive agents in a seasonal foraging world."""

from .agents import AgentConfig, AgentState, act, make_agent, reset_for_iteration
from .env import Action, GridWorld, Observation, Resource, Season, make_world
from .harness import ExperimentConfig, TrialRecord, run_experiment
from .planner import VARIANTS, SearchConfig, SearchVariant, forward_tree_search, plan
from .valuation import PreferenceSpec

__version__ = "0.1.0"
