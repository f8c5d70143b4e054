import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from artifact.odeint import TimeGrid, integrate, integrate_batch, refine_check


def test_exponential_decay():
    path = integrate(lambda t, x: -x, [1.0], TimeGrid(0.0, 1.0, 1000))
    assert path.completed
    assert path.final[0] == pytest.approx(np.exp(-1.0), abs=1e-9)
    assert len(path.times) == 1001


def test_finite_time_blowup_is_reported():
    grid = TimeGrid(0.0, 2.0, 2000)
    path = integrate(lambda t, x: x * x, [1.0], grid, bound=1e6)
    assert not path.completed
    # the pole at t = 1 is located to within the fixed step
    assert path.status == "blew_up" and path.blowup_time <= 1.0 + 1.5 * grid.step
    assert np.all(np.isfinite(path.values))


def test_variance_riccati():
    path = integrate(lambda t, g: -g * g, [1.0], TimeGrid(0.0, 1.0, 1000))
    assert path.final[0] == pytest.approx(0.5, abs=1e-9)


def test_backward_grid():
    grid = TimeGrid(1.0, 0.0, 1000)
    assert grid.step < 0 and grid.times[-1] == pytest.approx(0.0)
    path = integrate(lambda t, x: -x, [np.exp(-1.0)], grid)
    assert path.final[0] == pytest.approx(1.0, abs=1e-9)


def test_field_errors_stop_integration():
    def bad(t, x):
        if t > 0.5:
            raise ZeroDivisionError("pole")
        return -x
    path = integrate(bad, [1.0], TimeGrid(0.0, 1.0, 10))
    assert not path.completed and "ZeroDivisionError" in path.reason
    nan = integrate(lambda t, x: x * np.nan, [1.0], TimeGrid(0.0, 1.0, 10))
    assert nan.reason == "non-finite derivative"


def test_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, 0)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1.0, 5)
    assert TimeGrid.with_density(0.0, 2.0, 400).n_steps == 800


def test_fourth_order_convergence():
    rot = np.array([[0.0, 1.0], [-1.0, 0.0]])
    rep = refine_check(lambda t, y: rot @ y, [1.0, 0.0], TimeGrid(0.0, 2.0, 20))
    assert rep.consistent and 12 <= rep.ratio <= 20


def test_refinement_on_stiff_variance():
    rep = refine_check(lambda t, g: -50.0 * g * g, [1.0], TimeGrid(0.0, 1.0, 50))
    assert rep.consistent and np.isfinite(rep.ratio) and rep.diff_fine < rep.diff_coarse


def test_refinement_flags_differing_blowups():
    rep = refine_check(lambda t, x: x * x, [1.0], TimeGrid(0.0, 0.999, 4), bound=50.0)
    assert len(set(rep.blowup_times)) > 1 or not rep.consistent


def test_batch_matches_scalar():
    init = np.array([[1.0, 0.5, 2.0]])
    end = integrate_batch(lambda t, y: -y * y, init, TimeGrid(0.0, 1.0, 200))
    assert end.completed.all()
    for k, x0 in enumerate(init[0]):
        scalar = integrate(lambda t, y: -y * y, [x0], TimeGrid(0.0, 1.0, 200)).final[0]
        assert end.final[0, k] == scalar


def test_batch_freezes_failed_columns():
    init = np.array([[1.0, -1.0]])
    end = integrate_batch(lambda t, y: y * y, init, TimeGrid(0.0, 2.0, 400), bound=1e6)
    assert list(end.completed) == [False, True]
    assert end.blowup_time[0] <= 1.0 + 1.5 * 2.0 / 400 and np.isnan(end.blowup_time[1])


@given(st.floats(-2.0, 2.0), st.floats(0.1, 3.0))
def test_linear_ode_against_closed_form(lam, T):
    path = integrate(lambda t, x: lam * x, [1.0], TimeGrid(0.0, T, 400))
    assert path.final[0] == pytest.approx(np.exp(lam * T), rel=1e-8)


@given(st.floats(0.1, 2.0), st.floats(0.1, 1.0))
def test_forward_then_backward_returns(g0, a):
    f = lambda t, y: np.array([-y[0] ** 2 * a * a, y[0] * a * a * (1 - y[1])])  # noqa: E731
    fwd = integrate(f, [g0, 0.0], TimeGrid(0.0, 2.0, 800))
    back = integrate(f, fwd.final, TimeGrid(2.0, 0.0, 800))
    np.testing.assert_allclose(back.final, [g0, 0.0], atol=1e-8)
