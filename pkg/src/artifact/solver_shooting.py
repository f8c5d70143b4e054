"""One-dimensional shooting on the horizon posterior variance γ_T.

Every backward system here starts at t = T from a state that depends only on
a guess γ^F for γ_T (χ_T is either zero, 1 - γ_T/γ⁰, or the closed form of
the learning ODEs). Integrating back to t = 0 gives γ_0(γ^F), and the
equilibrium is the root of γ_0(γ^F) - γ⁰.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .assemble import EquilibriumSolution, assemble
from .errors import BlowUp, NoBracket, NoConvergence
from .fields import (
    B0, B1, B2, B3, CHI, GAMMA, NO_TERMINAL_PAYOFF, V6, V8, TerminalPayoffSpec,
    field_general, field_nofeedback_backward, general_rhs_batch, field_private_interior, field_public_backward,
    terminal_state_builder,
)
from .learning import chi_closed_form, chi_constants, chi_no_feedback
from .odeint import DEFAULT_BOUND, DEFAULT_STEPS_PER_UNIT, Path, TimeGrid, integrate, integrate_batch
from .payoffs import GameParams, PayoffSpec, leadership_spec, terminal_coefficients

N_PROBES = 32
TOP_FRACTION = 1.0 - 1e-9
BOTTOM_FRACTION = 1e-6


@dataclass
class ShootResult:
    gammaF: float
    path: Path
    residual: float
    bracket_history: list = field(default_factory=list)
    sign_changes: int = 0


@dataclass(frozen=True)
class BackwardProblem:
    """A backward IVP parametrized by the guess for γ_T.

    ``field(tau, y)`` is the derivative in backward time τ = T - t and
    ``initial(gF)`` the state at τ = 0. ``batch_field``, when given, evaluates
    a (dim, n) array of states at once and marks failures with NaN; the probe
    scan then integrates all probes together.
    """

    field: Callable
    initial: Callable
    gamma_index: int
    batch_field: Callable | None = None


def probe_points(gamma0: float, n: int = N_PROBES) -> np.ndarray:
    """Geometric scan of (0, γ⁰) ending at γ⁰(1 - 1e-9)."""
    return gamma0 * np.geomspace(BOTTOM_FRACTION, TOP_FRACTION, n)


def _residual(problem: BackwardProblem, gF, grid, gamma0, bound):
    path = integrate(problem.field, problem.initial(gF), grid, bound)
    if path.completed:
        return path.final[problem.gamma_index] - gamma0, path
    if path.blowup_component == problem.gamma_index:
        # γ only grows backward; exploding γ overshoots γ⁰
        return np.inf, path
    return np.nan, path


def _scan(problem: BackwardProblem, probes, grid, gamma0, bound):
    """γ-residual at every probe; +inf for γ blow-up, NaN for other failures."""
    if problem.batch_field is None:
        return [_residual(problem, gF, grid, gamma0, bound)[0] for gF in probes]
    init = np.column_stack([problem.initial(gF) for gF in probes])
    end = integrate_batch(problem.batch_field, init, grid, bound)
    res = end.final[problem.gamma_index] - gamma0
    res = np.where(end.completed, res, np.nan)
    return np.where(~end.completed & (end.blowup_component == problem.gamma_index), np.inf, res)


def _value_at(history, gF):
    for g, r in reversed(history):
        if g == gF:
            return r
    return np.nan


def _refine_bracket(problem, bracket, grid, gamma0, bound, history, levels=6, n=16):
    """Narrow a bracket whose upper end failed or exploded.

    The root sits between the last finite negative probe and the first probe
    that failed; rescan that interval until a finite positive value turns up.
    Returns None if no finite bracket is found.
    """
    lo, hi = bracket
    for _ in range(levels):
        probes = np.geomspace(lo, hi, n)[1:-1]
        res = _scan(problem, probes, grid, gamma0, bound)
        history.extend((float(g), float(r)) for g, r in zip(probes, res))
        for g, r in zip(probes, res):
            if np.isfinite(r) and r < 0:
                lo = g
            elif np.isfinite(r) and r >= 0:
                return lo, g
            else:
                hi = g
                break
    return None


def shoot_1d(problem: BackwardProblem, params: GameParams, tol: float = 1e-9, max_probes: int = N_PROBES,
             steps_per_unit: int = DEFAULT_STEPS_PER_UNIT, bound: float = DEFAULT_BOUND) -> ShootResult:
    """Find γ^F with |γ_0(γ^F) - γ⁰| ≤ tol by a geometric scan then Brent's method."""
    gamma0 = params.gamma0
    grid = TimeGrid.with_density(0.0, params.T, steps_per_unit)
    history = []
    bracket = None
    sign_changes = 0
    prev = None
    probes = probe_points(gamma0, max_probes)
    for gF, res in zip(probes, _scan(problem, probes, grid, gamma0, bound)):
        history.append((float(gF), float(res)))
        if prev is not None and np.isfinite(prev[1]) and not np.isnan(res) and np.sign(res) != np.sign(prev[1]):
            sign_changes += 1
            if bracket is None:
                bracket = (prev[0], gF)
        if not np.isnan(res):
            prev = (gF, res)
    if bracket is not None and not np.isfinite(_value_at(history, bracket[1])):
        bracket = _refine_bracket(problem, bracket, grid, gamma0, bound, history) or bracket
    if bracket is None and prev is not None and prev[1] < 0:
        # the scan ended negative and every later probe failed: the root may hide before the first failure
        failed = [g for g, r in history if g > prev[0] and np.isnan(r)]
        if failed:
            bracket = _refine_bracket(problem, (prev[0], failed[0]), grid, gamma0, bound, history)
            sign_changes += bracket is not None
    if bracket is None:
        finite = [r for _, r in history if not np.isnan(r)]
        if finite and all(r < 0 for r in finite):
            raise NoBracket(f"γ_0 stays below γ⁰ for every probe (last residual {finite[-1]:.3g})")
        raise NoBracket("no sign change among the probes that completed")

    class _Hit(Exception):
        pass

    def f(gF):
        res, path = _residual(problem, gF, grid, gamma0, bound)
        if np.isnan(res):
            raise BlowUp(f"backward integration failed inside the bracket: {path.reason}", probe=gF,
                         time=path.blowup_time)
        history.append((float(gF), float(res)))
        if abs(res) <= 1e-3 * tol:
            raise _Hit(gF, res, path)
        return res if np.isfinite(res) else 1e300

    lo, hi = bracket
    try:
        root = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        res, path = _residual(problem, root, grid, gamma0, bound)
    except _Hit as hit:
        root, res, path = hit.args
    if not path.completed or not abs(res) <= tol:
        raise NoConvergence(abs(res), root)
    return ShootResult(float(root), path, float(res), history, sign_changes)


def _forward(result: ShootResult, params: GameParams):
    """Forward grid and states (time ascending) from a backward path."""
    tau = result.path.times
    return params.T - tau[::-1], result.path.values[::-1]


# ---------------------------------------------------------------- backward problems

def public_problem(spec: PayoffSpec, params: GameParams, term: TerminalPayoffSpec = NO_TERMINAL_PAYOFF,
                   printed: bool | None = None) -> BackwardProblem:
    """σ_X = 0. Uses the printed (β0, β1, β3, γ) system for the plain leadership game."""
    if printed is None:
        printed = _is_leadership(spec) and term.is_zero
    if printed:
        def init(gF):
            b, _ = terminal_coefficients(spec, 0.0)
            return np.array([b[0], b[1] + b[2], b[3], gF])
        fld = lambda t, y: field_public_backward(y, params)  # noqa: E731
        return BackwardProblem(fld, init, 3, fld)
    return general_problem(spec, params, term, chi_of_gamma=lambda g: 0.0)


def nofeedback_problem(spec: PayoffSpec, params: GameParams, term: TerminalPayoffSpec = NO_TERMINAL_PAYOFF,
                       printed: bool | None = None) -> BackwardProblem:
    """σ_X = ∞. The printed system carries (weight on μ, β1, β3, γ)."""
    if printed is None:
        printed = _is_leadership(spec) and term.is_zero
    gamma0 = params.gamma0
    if printed:
        def init(gF):
            b, _ = terminal_coefficients(spec, chi_no_feedback(gF, gamma0))
            return np.array([b[2], b[1], b[3], gF])
        fld = lambda t, y: field_nofeedback_backward(y, params)  # noqa: E731
        return BackwardProblem(fld, init, 3, fld)
    return general_problem(spec, params, term, chi_of_gamma=lambda g: chi_no_feedback(g, gamma0))


def private_interior_problem(spec: PayoffSpec, params: GameParams) -> BackwardProblem:
    """Printed six-equation leadership system (r = 0) with χ from the closed form."""
    cmap = chi_constants(spec.uhat_hataa, params.sigma_X, params.sigma_Y)

    def init(gF):
        chi_T = chi_closed_form(gF, cmap, params.gamma0)
        b, _ = terminal_coefficients(spec, chi_T)
        return np.array([0.0, 0.0, b[1], b[2], b[3], gF])

    fld = lambda t, y: -field_private_interior(y, params, cmap)  # noqa: E731
    return BackwardProblem(fld, init, 5, fld)


def general_problem(spec: PayoffSpec, params: GameParams, term: TerminalPayoffSpec,
                    chi_of_gamma: Callable, pin_chi: bool = False) -> BackwardProblem:
    """Backward HJB-matching field on the 8-component core, any regime.

    With ``pin_chi`` the χ component is overwritten by ``chi_of_gamma(γ)``
    before every evaluation, so χ follows its closed form exactly.
    """
    def init(gF):
        chi_T = chi_of_gamma(gF)
        ts = terminal_state_builder(spec, term, gF, chi_T, params)
        return ts.state_vector(gF, chi_T)[:8]

    def pinned(y):
        if not pin_chi:
            return y
        y = np.array(y, dtype=float)
        y[CHI] = chi_of_gamma(y[GAMMA])
        return y

    return BackwardProblem(lambda t, y: -field_general(pinned(y), spec, params), init, GAMMA,
                           lambda t, Y: -general_rhs_batch(pinned(Y), spec, params))


def _is_leadership(spec: PayoffSpec) -> bool:
    ref = leadership_spec()
    keys = ("u_atheta", "u_ahata", "u_hatahata", "uhat_hatatheta", "uhat_hataa", "u0", "uhat0")
    return all(np.isclose(getattr(spec, k), getattr(ref, k)) for k in keys)


# ---------------------------------------------------------------- converting to the general layout

def _core_from(result: ShootResult, kind: str, spec: PayoffSpec, params: GameParams):
    t, y = _forward(result, params)
    core = np.zeros((len(t), 12))
    if kind == "public":
        core[:, [B0, B1, B3, GAMMA]] = y
    elif kind == "nofeedback":
        core[:, [B2, B1, B3, GAMMA]] = y
        core[:, CHI] = chi_no_feedback(y[:, 3], params.gamma0)
    elif kind == "interior":
        cmap = chi_constants(spec.uhat_hataa, params.sigma_X, params.sigma_Y)
        core[:, [V6, V8, B1, B2, B3, GAMMA]] = y
        core[:, CHI] = chi_closed_form(y[:, 5], cmap, params.gamma0)
    else:
        core[:, :8] = y
        if kind == "general_pinned":
            cmap = chi_constants(spec.uhat_hataa, params.sigma_X, params.sigma_Y)
            core[:, CHI] = chi_closed_form(y[:, GAMMA], cmap, params.gamma0)
    return t, core


def _solve(problem, kind, spec, params, term, tol, steps_per_unit, telemetry):
    res = shoot_1d(problem, params, tol=tol, steps_per_unit=steps_per_unit)
    t, core = _core_from(res, kind, spec, params)
    info = {"solver": "shoot_1d", "field": kind, "gammaF": res.gammaF, "gamma_residual": res.residual,
            "probes": len(res.bracket_history), "sign_changes": res.sign_changes,
            "steps_per_unit": steps_per_unit, **telemetry}
    sol = assemble(t, core, spec, params, term, info)
    sol.diagnostics.invariant_flags["gamma_residual"] = abs(res.residual) <= tol
    return sol


def solve_public(spec: PayoffSpec, params: GameParams, term: TerminalPayoffSpec = NO_TERMINAL_PAYOFF,
                 tol: float = 1e-9, steps_per_unit: int = DEFAULT_STEPS_PER_UNIT,
                 printed: bool | None = None) -> EquilibriumSolution:
    if params.regime != "public":
        params = params.replace(sigma_X=0.0)
    if printed is None:
        printed = _is_leadership(spec) and term.is_zero
    problem = public_problem(spec, params, term, printed)
    return _solve(problem, "public" if printed else "general", spec, params, term, tol, steps_per_unit, {})


def solve_nofeedback(spec: PayoffSpec, params: GameParams, term: TerminalPayoffSpec = NO_TERMINAL_PAYOFF,
                     tol: float = 1e-9, steps_per_unit: int = DEFAULT_STEPS_PER_UNIT,
                     printed: bool | None = None) -> EquilibriumSolution:
    if params.regime != "nofeedback":
        params = params.replace(sigma_X=float("inf"))
    if printed is None:
        printed = _is_leadership(spec) and term.is_zero
    problem = nofeedback_problem(spec, params, term, printed)
    return _solve(problem, "nofeedback" if printed else "general", spec, params, term, tol, steps_per_unit, {})


def solve_private_interior(spec: PayoffSpec, params: GameParams, tol: float = 1e-9,
                           steps_per_unit: int = DEFAULT_STEPS_PER_UNIT,
                           printed: bool | None = None) -> EquilibriumSolution:
    """Interior σ_X with a private-value follower (δ1 = û_âa·α3).

    For r = 0 and the leadership payoff the printed six-equation system is
    shot; otherwise the general field is shot with χ_T from the closed form,
    which holds for any r because it only uses the learning ODEs.
    """
    if params.regime != "interior":
        raise ValueError("solve_private_interior needs a finite positive sigma_X")
    if spec.uhat_hatatheta != 0:
        raise ValueError("private values need û_âθ = 0; use solve_fixed_point")
    if printed is None:
        printed = params.r == 0 and _is_leadership(spec)
    if printed:
        problem = private_interior_problem(spec, params)
        kind = "interior"
    else:
        cmap = chi_constants(spec.uhat_hataa, params.sigma_X, params.sigma_Y)
        problem = general_problem(spec, params, NO_TERMINAL_PAYOFF,
                                  chi_of_gamma=lambda g: chi_closed_form(g, cmap, params.gamma0), pin_chi=True)
        kind = "general_pinned"
    return _solve(problem, kind, spec, params, NO_TERMINAL_PAYOFF, tol, steps_per_unit, {})


def solve_limit(spec: PayoffSpec, params: GameParams, term: TerminalPayoffSpec = NO_TERMINAL_PAYOFF,
                tol: float = 1e-9, steps_per_unit: int = DEFAULT_STEPS_PER_UNIT) -> EquilibriumSolution:
    """Dispatch on the monitoring regime of ``params``."""
    if params.regime == "public":
        return solve_public(spec, params, term, tol, steps_per_unit)
    if params.regime == "nofeedback":
        return solve_nofeedback(spec, params, term, tol, steps_per_unit)
    if not term.is_zero:
        raise ValueError("interior shooting supports no terminal payoff; use solve_fixed_point")
    return solve_private_interior(spec, params, tol, steps_per_unit)
