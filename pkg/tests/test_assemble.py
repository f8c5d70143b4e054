import dataclasses

import numpy as np
import pytest

from artifact.assemble import assemble, boundary_residual, foc_residual
from artifact.errors import AlphaVanishes
from artifact.fields import B3, NO_TERMINAL_PAYOFF, terminal_state_builder
from artifact.payoffs import GameParams, common_value_spec, leadership_spec
from artifact.solver_fixedpoint import solve_fixed_point
from artifact.solver_shooting import solve_public


@pytest.fixture(scope="module")
def leader_fp():
    return solve_fixed_point(common_value_spec(0.0), GameParams(1.0, 1.5, 1.0, T=1.0))


@pytest.fixture(scope="module")
def mixed_fp():
    return solve_fixed_point(common_value_spec(0.5), GameParams(1.0, 1.5, 1.0, T=1.0))


def test_leadership_has_no_constant_terms(leader_fp):
    v = leader_fp.value.v
    assert np.max(np.abs(v[:, 2])) < 1e-9
    assert np.max(np.abs(leader_fp.coefficients.beta[:, 0])) < 1e-9
    assert np.max(np.abs(v[:, [1, 3]])) < 1e-9


def test_terminal_cross_weight_vanishes(leader_fp):
    c = leader_fp.coefficients
    assert c.beta[-1, 3] == pytest.approx(0.5)
    assert leader_fp.value.v[-1, 7] == pytest.approx(0.0, abs=1e-12)


def test_public_recovery_formulas(public_solution):
    c = public_solution.coefficients
    v = public_solution.value.v
    sy2 = public_solution.params.sigma_Y**2
    b0, b1, _, b3 = c.beta.T
    g = c.gamma
    np.testing.assert_allclose(v[:, 2], 2 * sy2 * b0 / (b3 * g), atol=1e-9)
    np.testing.assert_allclose(v[:, 5], sy2 * (b1 - b3) / (b3 * g), rtol=1e-9)
    np.testing.assert_allclose(v[:, 7], 2 * sy2 * (2 * b3 - 1) / (b3 * g), rtol=1e-9, atol=1e-12)


def test_foc_residual_small_and_sensitive(mixed_fp):
    assert foc_residual(mixed_fp) < 1e-6
    broken = dataclasses.replace(mixed_fp, coefficients=dataclasses.replace(mixed_fp.coefficients,
                                                                             beta=mixed_fp.coefficients.beta.copy()))
    broken.coefficients.beta[:, 3] += 0.1
    assert foc_residual(broken) > 0.01


def test_foc_residual_seed_independent_when_exact(leader_fp):
    r = [foc_residual(leader_fp, seed=s) for s in range(3)]
    assert max(r) < 1e-9 and np.ptp(r) < 1e-12 + max(r)


def test_boundary_residuals(mixed_fp):
    assert np.all(mixed_fp.diagnostics.boundary_residuals <= 1e-6)
    assert boundary_residual(mixed_fp).shape == (8,)


def test_short_horizon_is_static():
    spec = leadership_spec()
    sol = solve_public(spec, GameParams(0.0, 1.5, 1.0, T=1e-4))
    assert np.all(boundary_residual(sol) <= 1e-9)


def test_terminal_consistency(mixed_fp):
    end = mixed_fp.states[-1]
    ts = terminal_state_builder(mixed_fp.spec, NO_TERMINAL_PAYOFF, end[6], end[7], mixed_fp.params)
    np.testing.assert_allclose(mixed_fp.coefficients.beta[-1], ts.beta, atol=1e-7)
    np.testing.assert_allclose(mixed_fp.value.v[-1, [6, 8]], ts.v[[6, 8]], atol=1e-7)


@pytest.mark.parametrize("name", ["leader_fp", "mixed_fp"])
def test_myopic_weight_on_path(name, request):
    sol = request.getfixturevalue(name)
    c = sol.coefficients
    np.testing.assert_allclose(c.delta[:, 1], sol.spec.uhat_hatatheta + sol.spec.uhat_hataa * c.alpha3, atol=1e-14)


def test_interior_leadership_sums(interior_solution):
    b = interior_solution.coefficients.beta
    assert np.max(np.abs(b[:, 0])) < 1e-9
    assert np.max(np.abs(b[:, 1:].sum(axis=1) - 1)) < 1e-7


def test_vanishing_signal_is_rejected(leader_fp):
    core = leader_fp.states.copy()
    core[5:, B3] = 0.0
    core[5:, 1] = 0.0
    with pytest.raises(AlphaVanishes):
        assemble(leader_fp.t, core, leader_fp.spec, leader_fp.params)
