"""Linear Markov equilibria of signaling games with a myopic receiver and private monitoring."""

from .payoffs import GameParams, PayoffSpec, common_value_spec, conflict_spec, leadership_spec, reputation_spec
from .solver_fixedpoint import solve_fixed_point
from .solver_shooting import solve_limit, solve_nofeedback, solve_private_interior, solve_public

__all__ = [
    "GameParams", "PayoffSpec", "common_value_spec", "conflict_spec", "leadership_spec", "reputation_spec",
    "solve_fixed_point", "solve_limit", "solve_nofeedback", "solve_private_interior", "solve_public",
]
