"""Turn a solved coefficient path into a full equilibrium object and check it.

Solvers hand over the core path (β1, β2, β3, v6, v8, γ, χ) on a forward time
grid. ``recover_secondary`` integrates the remaining linear block
(β0, v0, v1, v3, v4) backward from its terminal values, and the FOC fixes
v2, v5, v7, v9 pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AlphaVanishes
from .fields import (
    B0, B1, B2, B3, CHI, GAMMA, NO_TERMINAL_PAYOFF, V0, V1, V3, V4, V6, V8,
    TerminalPayoffSpec, full_value_coefficients, general_rhs, terminal_state_builder,
)
from .payoffs import GameParams, PayoffSpec, myopic_response, on_path_alpha

ALPHA_TOL = 1e-10
AUX = [B0, V0, V1, V3, V4]
CORE = [B1, B2, B3, V6, V8, GAMMA, CHI]


@dataclass
class CoefficientPath:
    t: np.ndarray
    beta: np.ndarray  # (n, 4): β0..β3
    alpha: np.ndarray  # (n, 3): α0, α2, α3
    delta: np.ndarray  # (n, 3): δ0, δ1, δ2
    gamma: np.ndarray
    chi: np.ndarray

    @property
    def alpha3(self) -> np.ndarray:
        return self.alpha[:, 2]


@dataclass
class ValueFunction:
    """Coefficients of V = v0 + v1θ + v2m + v3ℓ + v4θ² + v5m² + v6ℓ² + v7θm + v8θℓ + v9mℓ."""

    t: np.ndarray
    v: np.ndarray  # (n, 10), raw payoff units

    def __getitem__(self, j):
        return self.v[:, j]


@dataclass
class Diagnostics:
    foc_max_residual: float = float("nan")
    boundary_residuals: np.ndarray = field(default_factory=lambda: np.full(8, np.nan))
    invariant_flags: dict = field(default_factory=dict)
    telemetry: dict = field(default_factory=dict)


@dataclass
class EquilibriumSolution:
    coefficients: CoefficientPath
    value: ValueFunction
    diagnostics: Diagnostics
    states: np.ndarray  # (n, 12) in the fields.py layout
    spec: PayoffSpec
    params: GameParams
    term: TerminalPayoffSpec = NO_TERMINAL_PAYOFF

    @property
    def t(self) -> np.ndarray:
        return self.coefficients.t

    @property
    def accepted(self) -> bool:
        flags = self.diagnostics.invariant_flags
        return bool(flags) and all(flags.values())


def _hermite_mid(y0, y1, f0, f1, h):
    """Cubic Hermite value halfway between two nodes h apart."""
    return 0.5 * (y0 + y1) + 0.125 * h * (f0 - f1)


def recover_secondary(t, core, spec: PayoffSpec, params: GameParams,
                      term: TerminalPayoffSpec = NO_TERMINAL_PAYOFF) -> np.ndarray:
    """Full (n, 12) state path from a core path on the forward grid ``t``.

    ``core`` is (n, 12) or (n, 8) in the fields layout; only the core entries
    are read. The auxiliary block is integrated backward by RK4 on the same
    grid, with the core at half steps taken from cubic Hermite interpolation.
    """
    t = np.asarray(t, dtype=float)
    n = len(t)
    y = np.zeros((n, 12))
    y[:, : min(core.shape[1], 12)] = core[:, :12]
    y[:, AUX] = 0.0
    chi = 0.0 if params.regime == "public" else y[:, CHI]
    weak = np.flatnonzero(np.abs(y[:, B3] + y[:, B1] * chi) < ALPHA_TOL)
    if weak.size:
        raise AlphaVanishes(float(t[weak[0]]))
    term_state = terminal_state_builder(spec, term, y[-1, GAMMA], y[-1, CHI], params)
    y[-1, B0] = term_state.beta[0]
    tv = term_state.v
    y[-1, V0], y[-1, V1], y[-1, V3], y[-1, V4] = tv[0], tv[1], tv[3], tv[4]
    fcore = np.array([general_rhs(y[i], spec, params)[CORE] for i in range(n)])

    def aux_rhs(state):
        return general_rhs(state, spec, params)[AUX]

    for i in range(n - 1, 0, -1):
        h = t[i] - t[i - 1]
        mid = y[i].copy()
        mid[CORE] = _hermite_mid(y[i - 1, CORE], y[i, CORE], fcore[i - 1], fcore[i], h)
        aux = y[i, AUX]
        s = y[i].copy()
        k1 = aux_rhs(s)
        mid[AUX] = aux - 0.5 * h * k1
        k2 = aux_rhs(mid)
        mid[AUX] = aux - 0.5 * h * k2
        k3 = aux_rhs(mid)
        end = y[i - 1].copy()
        end[AUX] = aux - h * k3
        k4 = aux_rhs(end)
        y[i - 1, AUX] = aux - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def coefficient_path(t, states, spec: PayoffSpec, params: GameParams) -> CoefficientPath:
    public = params.regime == "public"
    beta = states[:, [B0, B1, B2, B3]].copy()
    chi = states[:, CHI].copy()
    if public:
        beta[:, 2] = 0.0
        chi[:] = 0.0
    alpha = np.column_stack(on_path_alpha(beta[:, 0], beta[:, 1], beta[:, 2], beta[:, 3], chi))
    delta = np.column_stack(myopic_response(spec, (alpha[:, 0], alpha[:, 1], alpha[:, 2])))
    return CoefficientPath(np.asarray(t, dtype=float), beta, alpha, delta, states[:, GAMMA].copy(), chi)


def value_function(t, states, spec: PayoffSpec, params: GameParams) -> ValueFunction:
    v = np.array([full_value_coefficients(s, spec, params) for s in states])
    return ValueFunction(np.asarray(t, dtype=float), v)


def foc_residual(solution: EquilibriumSolution, spec: PayoffSpec = None, params: GameParams = None,
                 n_probe_states: int = 50, seed: int = 0) -> float:
    """Max |∂U/∂a + (γα3/σ_Y²)·∂V/∂m| at random (θ, m, ℓ) over every grid time, raw units."""
    spec = spec or solution.spec
    params = params or solution.params
    rng = np.random.default_rng(seed)
    probes = rng.normal(size=(n_probe_states, 3))
    th, m, l = probes.T
    if params.regime == "public":
        l = m
    c = solution.coefficients
    v = solution.value.v
    b0, b1, b2, b3 = (c.beta[:, j][:, None] for j in range(4))
    d0, d1, d2 = (c.delta[:, j][:, None] for j in range(3))
    a = b0 + b1 * m + b2 * l + b3 * th
    ahat = d0 + d1 * m + d2 * l
    dU = spec.scale * (-a + spec.u_atheta * th + spec.u_ahata * ahat + spec.u0)
    k = (c.gamma * c.alpha3 / params.sigma_Y**2)[:, None]
    Vm = v[:, 2][:, None] + 2.0 * v[:, 5][:, None] * m + v[:, 7][:, None] * th + v[:, 9][:, None] * l
    return float(np.max(np.abs(dU + k * Vm)))


def boundary_residual(solution: EquilibriumSolution, spec: PayoffSpec = None, params: GameParams = None,
                      term: TerminalPayoffSpec = None) -> np.ndarray:
    """|b_T - target| for (β0, β1, β2, β3, v6, v8), then |γ_0 - γ⁰| and |χ_0|."""
    spec = spec or solution.spec
    params = params or solution.params
    term = solution.term if term is None else term
    y = solution.states
    end = y[-1]
    target = terminal_state_builder(spec, term, end[GAMMA], end[CHI], params)
    got = np.array([end[B0], end[B1], end[B2], end[B3], end[V6], end[V8]])
    want = np.array([*target.beta, target.v[6], target.v[8]])
    if params.regime == "public":
        got[2] = want[2] = 0.0
    return np.concatenate([np.abs(got - want), [abs(y[0, GAMMA] - params.gamma0), abs(y[0, CHI])]])


def check_alpha(solution: EquilibriumSolution):
    a3 = solution.coefficients.alpha3
    bad = np.flatnonzero(np.abs(a3) < ALPHA_TOL)
    if bad.size:
        raise AlphaVanishes(float(solution.t[bad[0]]))


def assemble(t, core, spec: PayoffSpec, params: GameParams, term: TerminalPayoffSpec = NO_TERMINAL_PAYOFF,
             telemetry: dict | None = None, tol: float = 1e-6) -> EquilibriumSolution:
    """Recover the full solution from a core path and run the standard diagnostics."""
    states = recover_secondary(t, core, spec, params, term)
    coeffs = coefficient_path(t, states, spec, params)
    sol = EquilibriumSolution(coeffs, value_function(t, states, spec, params), Diagnostics(), states,
                              spec, params, term)
    d = sol.diagnostics
    d.telemetry = dict(telemetry or {})
    d.foc_max_residual = foc_residual(sol)
    d.boundary_residuals = boundary_residual(sol)
    g = coeffs.gamma
    flags = {
        "foc": d.foc_max_residual <= tol,
        "boundary": bool(np.all(d.boundary_residuals <= tol)),
        "gamma_in_range": bool(np.all((g > 0) & (g <= params.gamma0 + tol))),
        "chi_in_range": bool(np.all((coeffs.chi >= -tol) & (coeffs.chi < 1))),
        "finite": bool(np.all(np.isfinite(states)) and np.all(np.isfinite(sol.value.v))),
    }
    d.invariant_flags = flags
    return sol
