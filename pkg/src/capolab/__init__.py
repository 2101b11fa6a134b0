"""Coordinate ascent policy optimization on tabular MDPs, with exact oracles."""

from .errors import CapoError
from .mdp import TabularMdp, make_bandit, make_chain, make_random_mdp
from .policy import SoftmaxTable

__all__ = ["CapoError", "TabularMdp", "SoftmaxTable", "make_bandit", "make_chain",
           "make_random_mdp"]
__version__ = "0.1.0"
