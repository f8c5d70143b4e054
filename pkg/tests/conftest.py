import math

import pytest
from hypothesis import HealthCheck, settings

from artifact.payoffs import GameParams, leadership_spec
from artifact.solver_shooting import solve_nofeedback, solve_private_interior, solve_public

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

FIG1 = dict(sigma_Y=1.5, gamma0=1.0, T=10.0, r=0.0)


@pytest.fixture(scope="session")
def leader():
    return leadership_spec()


@pytest.fixture(scope="session")
def public_solution(leader):
    return solve_public(leader, GameParams(sigma_X=0.0, **FIG1))


@pytest.fixture(scope="session")
def nofeedback_solution(leader):
    return solve_nofeedback(leader, GameParams(sigma_X=math.inf, **FIG1))


@pytest.fixture(scope="session")
def interior_solution(leader):
    """Short interior leadership equilibrium, cheap enough for simulation tests."""
    return solve_private_interior(leader, GameParams(sigma_X=1.0, sigma_Y=1.5, gamma0=1.0, T=2.0),
                                  steps_per_unit=100)
