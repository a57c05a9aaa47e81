"""Analytic solver, simulator and inference tools for scrip economies."""
__version__ = "0.1.0"

from .equilibrium import EquilibriumReport, best_reply_profile, critical_money, greatest_equilibrium, welfare_sweep
from .errors import ScripError
from .mdp import WalkParams, best_reply_threshold, discounted_absorption, transition_probs
from .model import AgentType, Behavior, GameSpec, ValidatedSpec, WealthDistribution, load_spec, make_spec, validate_spec
from .steady_state import expected_welfare, solve_lambda, steady_state, wealth_distribution

__all__ = [
    "AgentType", "Behavior", "EquilibriumReport", "GameSpec", "ScripError", "ValidatedSpec", "WalkParams",
    "WealthDistribution", "best_reply_profile", "best_reply_threshold", "critical_money", "discounted_absorption",
    "expected_welfare", "greatest_equilibrium", "load_spec", "make_spec", "solve_lambda", "steady_state",
    "transition_probs", "validate_spec", "wealth_distribution", "welfare_sweep",
]
