"""Preference-based synthesis for concurrent stochastic games with LTLf goals."""
from .analysis import check_nash, outcome_set, verify_ndaswin
from .game import ConcurrentGame, Strategy, load_game
from .gridworld import GridScenario, load_scenario, rank_map
from .ltlf import parse_ltlf, to_dfa
from .preference import build_preference_automaton, load_pref_spec, parse_pref_spec
from .product import build_product
from .rank import compute_ranks
from .solver import aswin, ndaswin

__version__ = "0.1.0"

__all__ = [
    "ConcurrentGame", "GridScenario", "Strategy", "aswin", "build_preference_automaton", "build_product",
    "check_nash", "compute_ranks", "load_game", "load_pref_spec", "load_scenario", "ndaswin", "outcome_set",
    "parse_ltlf", "parse_pref_spec", "rank_map", "to_dfa", "verify_ndaswin",
]
