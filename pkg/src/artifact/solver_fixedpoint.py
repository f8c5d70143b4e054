"""Gap-function fixed point for the forward interior system.

The unknowns are the initial values s = (ṽ6, ṽ8, β1, β̃2, β3) at t = 0, where
γ = γ⁰ and χ = 0 are known. Integrating forward gives z_T(s) and
g(s) = B(χ_T(s)) - (z_T(s) - s). A fixed point of g makes the forward path
hit the terminal conditions exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assemble import EquilibriumSolution, assemble
from .errors import ArtifactError, IvpBlowUp, NoConvergence
from .fields import (
    CHI, GAMMA, NO_TERMINAL_PAYOFF, TerminalPayoffSpec, _common_value_terms, field_common_value,
    field_general, from_tilde, terminal_state_builder, to_tilde,
)
from .odeint import DEFAULT_BOUND, DEFAULT_STEPS_PER_UNIT, TimeGrid, integrate
from .payoffs import GameParams, PayoffSpec, terminal_coefficients

NEWTON_SWITCH = 1e-3
FD_STEP = 1e-6


@dataclass
class GapPoint:
    s: np.ndarray
    g_of_s: np.ndarray
    residual: float
    chi_T: float
    gamma_T: float
    path: object = field(default=None, repr=False)  # odeint.Path of the forward IVP
    field_kind: str = "general"


@dataclass
class SelfMapCertificate:
    rho: float
    K: float
    T_SBC: float
    T_SMC: float
    h: np.ndarray
    delta_bar: np.ndarray
    sampled_max_excursion: float
    passes: bool
    bound_kind: str = "printed-terms"


def terminal_target(spec: PayoffSpec, term: TerminalPayoffSpec, gamma_T, chi_T, params: GameParams) -> np.ndarray:
    """B(χ_T) in tilde coordinates (ṽ6, ṽ8, β1, β̃2, β3)."""
    ts = terminal_state_builder(spec, term, gamma_T, chi_T, params)
    om = 1.0 - chi_T
    return np.array([ts.v[6] * gamma_T / om**2, ts.v[8] * gamma_T / om, ts.beta[1], ts.beta[2] / om, ts.beta[3]])


def initial_guess(spec: PayoffSpec, params: GameParams, term: TerminalPayoffSpec = NO_TERMINAL_PAYOFF) -> np.ndarray:
    """s0 = B(0)."""
    return terminal_target(spec, term, params.gamma0, 0.0, params)


def _resolve_field(kind: str, spec: PayoffSpec) -> str:
    if kind == "auto":
        return "printed" if spec.uhat_hataa == 1.0 and spec.u_atheta == 0.5 and spec.u_ahata == 0.5 else "general"
    if kind not in ("general", "printed"):
        raise ValueError(f"unknown field {kind!r}")
    return kind


def _forward_ivp(s, spec, params, kind, steps_per_unit, bound):
    grid = TimeGrid.with_density(0.0, params.T, steps_per_unit)
    z0 = np.array([*s, params.gamma0, 0.0])
    if kind == "printed":
        path = integrate(lambda t, z: field_common_value(z, spec, params), z0, grid, bound)
    else:
        path = integrate(lambda t, y: field_general(y, spec, params), from_tilde(z0), grid, bound)
    return path


def _tilde_end(path, kind):
    end = path.final
    return end[:5] if kind == "printed" else to_tilde(end)[:5], end


def gap(s, spec: PayoffSpec, params: GameParams, term: TerminalPayoffSpec = NO_TERMINAL_PAYOFF,
        field: str = "general", steps_per_unit: int = DEFAULT_STEPS_PER_UNIT,
        bound: float = DEFAULT_BOUND) -> GapPoint:
    """Evaluate g(s) = B(χ_T(s)) - (z_T(s) - s) by one forward integration."""
    if params.regime != "interior":
        raise ValueError("the gap map needs a finite positive sigma_X")
    kind = _resolve_field(field, spec)
    s = np.asarray(s, dtype=float)
    path = _forward_ivp(s, spec, params, kind, steps_per_unit, bound)
    if not path.completed:
        raise IvpBlowUp(s, path.blowup_time)
    zT, end = _tilde_end(path, kind)
    gamma_T, chi_T = (end[5], end[6]) if kind == "printed" else (end[GAMMA], end[CHI])
    g = terminal_target(spec, term, gamma_T, chi_T, params) - (zT - s)
    return GapPoint(s, g, float(np.max(np.abs(g - s))), float(chi_T), float(gamma_T), path, kind)


def _fd_jacobian(s, h0, evaluate):
    """Forward-difference Jacobian of h(s) = g(s) - s."""
    n = len(s)
    J = np.empty((n, n))
    for i in range(n):
        step = FD_STEP * (1.0 + abs(s[i]))
        sp = s.copy()
        sp[i] += step
        gp = evaluate(sp)
        J[:, i] = ((gp.g_of_s - sp) - h0) / step
    return J


def find_fixed_point(spec: PayoffSpec, params: GameParams, term: TerminalPayoffSpec = NO_TERMINAL_PAYOFF,
                     tol: float = 1e-10, max_iter: int = 200, omega: float = 0.5, field: str = "general",
                     steps_per_unit: int = DEFAULT_STEPS_PER_UNIT, s_init=None):
    """Damped iteration from s0, then finite-difference Newton once ‖h‖∞ < 1e-3.

    Returns (GapPoint at s*, telemetry). Raises NoConvergence or IvpBlowUp.
    """
    def evaluate(s):
        return gap(s, spec, params, term, field, steps_per_unit)

    s = initial_guess(spec, params, term) if s_init is None else np.asarray(s_init, dtype=float)
    history = []
    best = None
    n_gap = 0
    newton_steps = 0
    for it in range(max_iter):
        gp = evaluate(s)
        n_gap += 1
        history.append(gp.residual)
        if best is None or gp.residual < best.residual:
            best = gp
        if gp.residual <= tol:
            return gp, {"iterations": it, "gap_evaluations": n_gap, "newton_steps": newton_steps,
                        "residual_history": history}
        h = gp.g_of_s - s
        if gp.residual < NEWTON_SWITCH:
            J = _fd_jacobian(s, h, evaluate)
            n_gap += len(s)
            try:
                step = np.linalg.solve(J, -h)
            except np.linalg.LinAlgError:
                step = omega * h
            trial = s + step
            try:
                gt = evaluate(trial)
                n_gap += 1
            except ArtifactError:
                gt = None
            if gt is not None and gt.residual < gp.residual:
                newton_steps += 1
                s = trial
                continue
        s = s + omega * h
    raise NoConvergence(best.residual, best.s)


def solve_fixed_point(spec: PayoffSpec, params: GameParams, term: TerminalPayoffSpec = NO_TERMINAL_PAYOFF,
                      rho: float = 1.0, tol: float = 1e-10, max_iter: int = 200, field: str = "general",
                      steps_per_unit: int = DEFAULT_STEPS_PER_UNIT) -> EquilibriumSolution:
    """Equilibrium from the gap fixed point. ``rho`` is recorded, not enforced."""
    gp, info = find_fixed_point(spec, params, term, tol, max_iter, field=field, steps_per_unit=steps_per_unit)
    path = gp.path
    t = path.times
    if gp.field_kind == "printed":
        core = np.array([from_tilde(z) for z in path.values])
    else:
        core = path.values
    s0 = initial_guess(spec, params, term)
    info = {"solver": "gap_fixed_point", "field": gp.field_kind, "gap_residual": gp.residual,
            "s_star": gp.s.tolist(), "distance_from_s0": float(np.max(np.abs(gp.s - s0))), "rho": rho,
            "steps_per_unit": steps_per_unit, **info}
    sol = assemble(t, core, spec, params, term, info)
    sol.diagnostics.invariant_flags["gap_residual"] = gp.residual <= max(tol, 1e-8)
    return sol


# ---------------------------------------------------------------- certificate

class _AbsBound(float):
    """A nonnegative number standing for an upper bound on |x|.

    Arithmetic with it follows the triangle inequality, so evaluating a
    polynomial expression on bounds gives a bound on the expression.
    """

    def __new__(cls, x):
        return super().__new__(cls, abs(float(x)))

    def __add__(self, o):
        return _AbsBound(float(self) + abs(float(o)))

    __radd__ = __add__
    __sub__ = __add__
    __rsub__ = __add__

    def __mul__(self, o):
        return _AbsBound(float(self) * abs(float(o)))

    __rmul__ = __mul__

    def __truediv__(self, o):
        return _AbsBound(float(self) / abs(float(o)))

    def __neg__(self):
        return self

    def __pow__(self, p):
        return _AbsBound(float(self) ** p)


def rhs_bounds(spec: PayoffSpec, params: GameParams, rho: float, K: float) -> np.ndarray:
    """h_i: bounds on |F_i| for the five tilde equations over the conjectured box.

    Box: |ṽ6|, |ṽ8| < ρ+K; |β1|, |β̃2| < |û_âa+2û_âθ|/4+ρ+K; |β3| < 1/2+ρ+K;
    χ ∈ [0, 1); γ ∈ (0, γ⁰]. Each printed term is bounded separately, and
    1 + û_âθ·χ is bounded below by min(1, 1 + û_âθ).
    """
    uth, uaa = spec.uhat_hatatheta, spec.uhat_hataa
    sx2, sy2 = params.sigma_X**2, params.sigma_Y**2
    vbar = rho + K
    b1bar = b2bar = abs(uaa + 2.0 * uth) / 4.0 + rho + K
    b3bar = 0.5 + rho + K
    chibar = 1.0
    z = (_AbsBound(vbar), _AbsBound(vbar), _AbsBound(b1bar), _AbsBound(b2bar), _AbsBound(b3bar),
         _AbsBound(params.gamma0), _AbsBound(chibar))
    v6_t, v8_t, b1_t, b2_t, b3_t, _ = _common_value_terms(z, uth, uaa, sx2, sy2)
    u_low = min(1.0, 1.0 + uth)
    if u_low <= 0:
        return np.full(5, np.inf)
    den = 4.0 * sx2 * sy2 * u_low
    g0 = params.gamma0
    return np.array([
        g0 * float(sum(v6_t)),
        g0 * float(sum(v8_t)),
        g0 * float(sum(b1_t)) / den,
        g0 * float(sum(b2_t)) / den,
        g0 * float(sum(b3_t)) / den,
    ])


def delta_bounds(spec: PayoffSpec, params: GameParams, rho: float, K: float) -> np.ndarray:
    """Δ̄_i with |B_i(χ_T) - B_i(0)| ≤ T·Δ̄_i, from χ_T ≤ γ⁰ᾱ²T/σ_Y²."""
    uth, uaa = spec.uhat_hatatheta, spec.uhat_hataa
    b_static = abs(uaa + 2.0 * uth) / 4.0
    alpha_bar = (b_static + rho + K) + (0.5 + rho + K)
    phi = min(2.0, 2.0 - uaa)
    if phi <= 0:
        return np.full(5, np.inf)
    # B_3, B_4 = b_static·2/(2 - û_âa·χ), so B(χ) - B(0) = b_static·û_âa·χ/(2 - û_âa·χ)
    d = b_static * abs(uaa) * params.gamma0 * alpha_bar**2 / params.sigma_Y**2 / phi
    return np.array([0.0, 0.0, d, d, 0.0])


def _delta_bounds_general(spec, params, rho, K, h):
    """Δ̄_i for a general payoff: B_3, B_4 scale with 1/(1 - kk·χ), kk = u_aâ·û_âa."""
    s0 = initial_guess(spec, params)
    alpha_bar = abs(s0[2]) + abs(s0[4]) + 2.0 * (rho + K)
    kk = spec.u_ahata * spec.uhat_hataa
    phi = min(1.0, 1.0 - kk)
    if phi <= 0:
        return np.full(5, np.inf)
    rate = abs(kk) * params.gamma0 * alpha_bar**2 / params.sigma_Y**2 / phi
    return np.array([0.0, 0.0, abs(s0[2]) * rate, abs(s0[3]) * rate, 0.0])


def _sampled_rhs_bounds(spec, params, rho, K, n, rng):
    s0 = initial_guess(spec, params)
    width = rho + K
    lo = s0 - width
    hi = s0 + width
    out = np.zeros(5)
    for _ in range(n):
        z5 = rng.uniform(lo, hi)
        gamma = rng.uniform(0.0, params.gamma0)
        chi = rng.uniform(0.0, 1.0 - 1e-6)
        y = from_tilde(np.array([*z5, max(gamma, 1e-12), chi]))
        try:
            dy = field_general(y, spec, params)
        except ArtifactError:
            return np.full(5, np.inf)
        dz = _tilde_rate(y, dy)
        out = np.maximum(out, np.abs(dz))
    return out


def _tilde_rate(y, dy):
    """Time derivative of (ṽ6, ṽ8, β1, β̃2, β3) from a general-layout derivative."""
    from .fields import B1, B2, B3, V6, V8
    g, c = y[GAMMA], y[CHI]
    dg, dc = dy[GAMMA], dy[CHI]
    om = 1.0 - c
    return np.array([
        (dy[V6] * g + y[V6] * dg) / om**2 + 2.0 * y[V6] * g * dc / om**3,
        (dy[V8] * g + y[V8] * dg) / om + y[V8] * g * dc / om**2,
        dy[B1],
        dy[B2] / om + y[B2] * dc / om**2,
        dy[B3],
    ])


def self_map_certificate(spec: PayoffSpec, params: GameParams, term: TerminalPayoffSpec = NO_TERMINAL_PAYOFF,
                         rho: float = 1.0, K: float = 1.0, n_samples: int = 32, seed: int = 0,
                         field: str = "general", steps_per_unit: int = DEFAULT_STEPS_PER_UNIT) -> SelfMapCertificate:
    """Numerical check that g maps the sup-norm ball S_ρ(s0) into itself.

    Half of the samples sit on the boundary of the ball, half inside. The
    analytic horizons use the term-wise bounds on the printed equations when
    they apply (û_âa = 1 with the leader payoff) and sampled sup-bounds of
    the general field otherwise.
    """
    rng = np.random.default_rng(seed)
    kind = _resolve_field("auto", spec)
    if kind == "printed":
        h = rhs_bounds(spec, params, rho, K)
        dbar = delta_bounds(spec, params, rho, K)
        bound_kind = "printed-terms"
    else:
        h = _sampled_rhs_bounds(spec, params, rho, K, 2000, rng)
        dbar = _delta_bounds_general(spec, params, rho, K, h)
        bound_kind = "sampled"
    with np.errstate(divide="ignore"):
        T_sbc = float(np.min(K / h))
        T_smc = float(min(T_sbc, np.min(rho / (dbar + h))))
    s0 = initial_guess(spec, params, term)
    worst = 0.0
    for i in range(n_samples):
        u = rng.uniform(-1.0, 1.0, size=5)
        if i % 2 == 0:
            j = rng.integers(5)
            u[j] = np.sign(u[j]) or 1.0
        s = s0 + rho * u
        try:
            gp = gap(s, spec, params, term, field, steps_per_unit)
            worst = max(worst, float(np.max(np.abs(gp.g_of_s - s0))))
        except ArtifactError:
            worst = np.inf
            break
    return SelfMapCertificate(rho, K, T_sbc, T_smc, h, dbar, worst, bool(worst <= rho), bound_kind)


def static_point(spec: PayoffSpec, params: GameParams) -> np.ndarray:
    """B(0) from the static coefficients; equals ``initial_guess`` with no terminal payoff."""
    beta, _ = terminal_coefficients(spec, 0.0)
    return np.array([0.0, 0.0, beta[1], beta[2], beta[3]])
