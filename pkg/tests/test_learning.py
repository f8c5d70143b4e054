import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from artifact.errors import ZeroSignalResponse
from artifact.learning import (
    GeneralLearningState, LearningState, chi_closed_form, chi_constants, chi_no_feedback,
    l_dynamics_coefficients, learning_rhs, learning_rhs_general,
)
from artifact.odeint import TimeGrid, integrate
from artifact.payoffs import GameParams


def test_learning_rhs_examples():
    p = GameParams(1.0, 1.5, 1.0)
    dg, dc = learning_rhs(LearningState(1.0, 0.0), 0.3, 0.5, 0.9, p)
    assert dg == pytest.approx(-1 / 9)
    dg, dc = learning_rhs(LearningState(0.7, 0.4), 0.0, 0.0, 1.2, p)
    assert dg == 0.0 and dc == pytest.approx(-0.7 * 0.16 * 1.44)


def test_learning_rhs_without_feedback_term():
    st_ = LearningState(0.6, 0.3)
    nf = learning_rhs(st_, 0.2, 0.5, 0.8, GameParams(math.inf, 1.5, 1.0))
    a = 0.5 + 0.2 * 0.3
    assert nf[1] == pytest.approx(0.6 * a * a * 0.7 / 2.25)
    assert learning_rhs(st_, 0.2, 0.5, 0.8, GameParams(0.0, 1.5, 1.0))[1] == 0.0


def test_general_system_with_full_drift_weight():
    p = GameParams(1.5, 1.5, 1.0, nu=1.0)
    g1, alpha = 0.8, 0.6
    dg1, _, _ = learning_rhs_general(GeneralLearningState(g1, 0.0, 0.0), 0.0, alpha, 0.0, p)
    assert dg1 == pytest.approx(-2 * g1 * g1 * alpha * alpha / 2.25)


def test_general_system_reduces_to_two_state_system():
    rng = np.random.default_rng(0)
    for _ in range(100):
        g, chi = rng.uniform(0.05, 1.0), rng.uniform(0.0, 0.95)
        b1, b3, d1 = rng.normal(size=3)
        p = GameParams(rng.uniform(0.2, 5), rng.uniform(0.5, 3), 1.0)
        dg1, dg2, dc = learning_rhs_general(GeneralLearningState(g, chi * g, chi), b1, b3, d1, p)
        dg, dchi = learning_rhs(LearningState(g, chi), b1, b3, d1, p)
        assert abs(dg1 - dg) <= 1e-14 * (1 + abs(dg))
        assert abs(dc - dchi) <= 1e-14 * (1 + abs(dchi))
        # γ2 = χγ1 is carried consistently
        assert dg2 == pytest.approx(dc * g + chi * dg1, abs=1e-13)


def _general_path(p, b1, b3, d1, T=2.0, n=4000):
    def f(t, y):
        return np.array(learning_rhs_general(GeneralLearningState(*y), b1, b3, d1, p))
    return integrate(f, [p.gamma0, 0.0, 0.0], TimeGrid(0.0, T, n))


def test_general_identity_along_integration():
    p = GameParams(0.8, 1.5, 1.0)
    path = _general_path(p, 0.3, 0.6, 0.9)
    g1, g2, chi = path.values.T
    assert np.max(np.abs(g2 - chi * g1)) < 1e-8


def test_general_system_with_drift_matches_fine_reference():
    # the same system at 1e-6 step is the reference, compared at T = 0.05
    p = GameParams(1.2, 1.5, 1.0, nu=0.5)
    coarse = _general_path(p, 0.3, 0.6, 0.9, T=0.05, n=50).final
    fine = _general_path(p, 0.3, 0.6, 0.9, T=0.05, n=50_000).final
    np.testing.assert_allclose(coarse, fine, atol=1e-10)


def test_chi_constants_golden_ratio_case():
    c = chi_constants(1.0, 1.0, 1.0)
    assert (c.c1, c.c2, c.d) == pytest.approx(((5**0.5 + 1) / 2, (5**0.5 - 1) / 2, 5**0.5))


def test_chi_constants_limits():
    assert chi_constants(1.0, 1e3, 1.5).c2 == pytest.approx(1.0, abs=1e-2)
    assert chi_constants(1.0, 1e-3, 1.5).c2 == pytest.approx(0.0, abs=1e-2)
    with pytest.raises(ZeroSignalResponse):
        chi_constants(0.0, 1.0, 1.0)


def test_chi_closed_form_endpoints():
    c = chi_constants(1.0, 1.0, 1.0)
    assert chi_closed_form(1.0, c, 1.0) == 0.0
    assert chi_closed_form(1e-12, c, 1.0) == pytest.approx(c.c2, abs=1e-9)


def _joint_path(sx, sy=1.5, alpha=0.7, T=3.0, n=30_000):
    """(γ, χ) integrated jointly with δ1 = α3 and a constant signal weight."""
    p = GameParams(sx, sy, 1.0)

    def f(t, y):
        return np.array(learning_rhs(LearningState(*y), 0.0, alpha, alpha, p))
    return integrate(f, [1.0, 0.0], TimeGrid(0.0, T, n))


@pytest.mark.parametrize("sx", [0.1, 1.0, 10.0])
def test_closed_form_matches_joint_integration(sx):
    path = _joint_path(sx)
    g, chi = path.values.T
    c = chi_constants(1.0, sx, 1.5)
    assert np.max(np.abs(chi_closed_form(g, c, 1.0) - chi)) < 1e-8


def test_closed_form_at_half_variance():
    path = _joint_path(1.0, sy=1.0, alpha=1.0, T=1.5, n=150_000)
    g, chi = path.values.T
    i = int(np.argmin(np.abs(g - 0.5)))
    c = chi_constants(1.0, 1.0, 1.0)
    # closed form at γ⁰/2 vs the integrated χ when γ crosses γ⁰/2 (interpolated)
    j = i if g[i] >= 0.5 else i - 1
    w = (g[j] - 0.5) / (g[j] - g[j + 1])
    chi_half = chi[j] + w * (chi[j + 1] - chi[j])
    assert chi_closed_form(0.5, c, 1.0) == pytest.approx(chi_half, abs=1e-9)


def test_chi_no_feedback_values_and_ode():
    assert chi_no_feedback(1.0, 1.0) == 0.0
    assert chi_no_feedback(0.25, 1.0) == 0.75
    p = GameParams(math.inf, 1.5, 1.0)
    for g, b1, b3 in [(0.9, 0.2, 0.6), (0.3, 0.5, 0.5)]:
        chi = chi_no_feedback(g, 1.0)
        dg, dchi = learning_rhs(LearningState(g, chi), b1, b3, 0.0, p)
        assert dchi == pytest.approx(-dg / p.gamma0)


def test_l_coefficients_examples():
    z = l_dynamics_coefficients(LearningState(0.5, 0.0), (0.3, 1.0, 0.2), 1.0)
    assert (z.l0, z.l1, z.B) == (0.0, 0.0, 0.0)
    z = l_dynamics_coefficients(LearningState(0.5, 0.3), (0.3, 0.0, 0.2), 1.0)
    assert (z.l0, z.l1, z.B) == (0.0, 0.0, 0.0)
    z = l_dynamics_coefficients(LearningState(0.5, 0.4), (0.0, 1.0, -0.2), 1.0)
    assert (z.l0, z.l1, z.B) == pytest.approx((0.0, -0.2 * 0.8 / 0.6, 0.2 / 0.6))


@given(st.floats(0.01, 0.999), st.floats(0.01, 0.999), st.floats(0.05, 20), st.floats(0.3, 5))
def test_closed_form_decreasing_and_bounded(g1, g2, sx, sy):
    c = chi_constants(1.0, sx, sy)
    lo, hi = sorted((g1, g2))
    x_lo, x_hi = chi_closed_form(lo, c, 1.0), chi_closed_form(hi, c, 1.0)
    assert 0.0 <= x_hi <= x_lo <= c.c2 < 1.0
    # strict decrease is only resolvable where the powers differ in floating point
    if hi**c.d - lo**c.d > 1e-9:
        assert x_lo > x_hi
    assert c.c1 > 0 and c.d > 0


@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-3, 3)), min_size=1, max_size=4),
       st.floats(0.2, 5.0), st.floats(0.5, 3.0))
def test_learning_invariants_under_bounded_inputs(pieces, sx, sy):
    p = GameParams(sx, sy, 1.0)
    T = 4.0
    k = len(pieces)

    def f(t, y):
        b1, b3, d1 = pieces[min(int(t / T * k), k - 1)]
        return np.array(learning_rhs(LearningState(*y), b1, b3, d1, p))
    path = integrate(f, [1.0, 0.0], TimeGrid(0.0, T, 800))
    g, chi = path.values.T
    assert path.completed
    assert np.all((g > 0) & (g <= 1.0))
    assert np.all((chi >= -1e-12) & (chi < 1.0))


@pytest.mark.parametrize("sx", [0.1, 1.0, 10.0])
def test_time_reversal_of_learning_system(sx):
    p = GameParams(sx, 1.5, 1.0)

    def f(t, y):
        return np.array(learning_rhs(LearningState(*y), 0.2, 0.6, 0.8, p))
    fwd = integrate(f, [1.0, 0.0], TimeGrid(0.0, 2.0, 2000))
    back = integrate(f, fwd.final, TimeGrid(2.0, 0.0, 2000))
    np.testing.assert_allclose(back.final, [1.0, 0.0], atol=1e-8)
