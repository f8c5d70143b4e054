import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from artifact.errors import DegenerateTerminal, NonConcave
from artifact.payoffs import (
    NO_FEEDBACK, PUBLIC, GameParams, PayoffSpec, leadership_spec, myopic_response, normalize_payoffs,
    on_path_alpha, quadratic_from_squares, terminal_coefficients, validate_assumptions,
)

finite = st.floats(-3, 3, allow_nan=False)


def test_leadership_normalization():
    s = leadership_spec()
    got = (s.u_atheta, s.u_ahata, s.u_hatahata, s.uhat_hatatheta, s.uhat_hataa, s.u0, s.uhat0)
    assert got == pytest.approx((0.5, 0.5, -0.5, 0.0, 1.0, 0.0, 0.0))
    assert s.scale == 4.0


def test_single_square_normalization():
    hU, gU = quadratic_from_squares([(-1.0, (1, 0, -1))])
    hV, gV = quadratic_from_squares([(-1.0, (0, 1, -1))])
    s = normalize_payoffs(hU, gU, hV, gV)
    assert (s.u_atheta, s.u_ahata, s.u_hatahata) == pytest.approx((1.0, 0.0, 0.0))


def test_flat_own_action_is_rejected():
    hU = np.zeros((3, 3))
    hV, gV = quadratic_from_squares([(-1.0, (0, 1, -1))])
    with pytest.raises(NonConcave):
        normalize_payoffs(hU, np.zeros(3), hV, gV)
    with pytest.raises(NonConcave):
        normalize_payoffs(-np.eye(3), np.zeros(3), np.zeros((3, 3)), np.zeros(3))


def test_flow_payoff_reproduces_raw_quadratic():
    s = leadership_spec()
    rng = np.random.default_rng(3)
    for a, ah, th in rng.normal(size=(20, 3)):
        raw = -(a - th) ** 2 - (a - ah) ** 2
        # the normalized form drops constants only; compare differences between two points
        raw0 = -(0 - th) ** 2 - (0 - ah) ** 2
        assert s.flow_payoff(a, ah, th) - s.flow_payoff(0.0, ah, th) == pytest.approx(raw - raw0)


def test_assumption_report():
    r = validate_assumptions(leadership_spec())
    assert r.ok and r.clause_ii == pytest.approx(0.25)
    no_myopic = PayoffSpec(0.5, 0.5, -0.5, 0.0, 0.0)
    assert validate_assumptions(no_myopic).failures == ("iii-myopic",)
    parallel = PayoffSpec(0.5, 1.0, 0.0, 0.0, 1.0)
    r = validate_assumptions(parallel)
    assert not r.clause_iv_ok and r.clause_iv == 1.0


def test_terminal_coefficients_examples():
    s = leadership_spec()
    b, _ = terminal_coefficients(s, 0.0)
    np.testing.assert_allclose(b, [0, 0.25, 0.25, 0.5], atol=1e-15)
    b, _ = terminal_coefficients(s, 0.5)
    np.testing.assert_allclose(b[1:], [1 / 3, 1 / 6, 0.5], atol=1e-15)
    b, _ = terminal_coefficients(PayoffSpec(0.5, 0.5, 0.0, 1.0, 0.0), 0.0)
    np.testing.assert_allclose(b[1:], [0.5, 0.0, 0.5], atol=1e-15)


def test_terminal_coefficients_degenerate():
    with pytest.raises(DegenerateTerminal):
        terminal_coefficients(PayoffSpec(0.5, 1.0, 0.0, 0.0, 1.0), 0.3)
    with pytest.raises(ValueError):
        terminal_coefficients(leadership_spec(), 1.0)


def test_myopic_response_examples():
    s = leadership_spec()
    assert myopic_response(s, (0.0, 0.0, 0.8))[1] == pytest.approx(0.8)
    s2 = PayoffSpec(0.5, 0.5, -0.5, 0.7, 0.3)
    assert myopic_response(s2, (0.0, 0.0, 0.0))[1] == pytest.approx(0.7)


def test_monitoring_sentinels():
    assert GameParams(0.0, 1.0, 1.0).sigma_X is PUBLIC
    assert GameParams(float("inf"), 1.0, 1.0).sigma_X is NO_FEEDBACK
    assert GameParams(2.0, 1.0, 1.0).regime == "interior"
    with pytest.raises(ValueError):
        GameParams(-1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        GameParams(1.0, 1.0, 1.0, nu=2.0)


specs = st.builds(
    PayoffSpec,
    u_atheta=st.floats(0.1, 2), u_ahata=st.floats(-1, 1), u_hatahata=finite,
    uhat_hatatheta=st.floats(0, 1), uhat_hataa=st.floats(-0.9, 0.9), u0=finite, uhat0=finite,
)


@given(specs, st.floats(0, 0.999))
def test_terminal_alpha_proportional_to_signal(spec, chi):
    b, d = terminal_coefficients(spec, chi)
    a0, a2, a3 = on_path_alpha(*b, chi)
    k = spec.u_ahata * spec.uhat_hataa
    expected = (spec.u_atheta + spec.u_ahata * spec.uhat_hatatheta * chi) / (1 - k * chi)
    assert a3 == pytest.approx(expected, rel=1e-9, abs=1e-12)
    assert d[1] == pytest.approx(spec.uhat_hatatheta + spec.uhat_hataa * a3, abs=1e-12)
    if validate_assumptions(spec).clause_ii_ok:
        assert a3 != 0


@given(specs, st.floats(0, 0.98))
def test_terminal_coefficients_continuous_in_chi(spec, chi):
    b1, _ = terminal_coefficients(spec, chi)
    b2, _ = terminal_coefficients(spec, chi + 1e-7)
    assert np.max(np.abs(b1 - b2)) < 1e-5 * (1 + np.max(np.abs(b1)))


@given(specs, st.tuples(finite, finite, finite), st.tuples(finite, finite, finite), finite)
def test_myopic_response_is_affine(spec, x, y, c):
    zero = np.array(myopic_response(spec, (0.0, 0.0, 0.0)))
    fx = np.array(myopic_response(spec, x)) - zero
    fy = np.array(myopic_response(spec, y)) - zero
    fxy = np.array(myopic_response(spec, tuple(np.add(x, y)))) - zero
    fcx = np.array(myopic_response(spec, tuple(c * np.array(x)))) - zero
    np.testing.assert_allclose(fxy, fx + fy, atol=1e-12)
    np.testing.assert_allclose(fcx, c * fx, atol=1e-12)
