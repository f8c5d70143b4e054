"""Vector fields for the equilibrium coefficient ODEs.

Two families live here:

* transcriptions of the printed reduced systems (public, no-feedback,
  private-value interior, common-value tilde system), and
* ``field_general``, which rebuilds the coefficient ODEs at any state by
  matching the ten monomial coefficients of the HJB equation. It is the
  oracle the printed systems are checked against.

Value-function coefficients are reported in raw payoff units (the
normalized value times ``spec.scale``), matching the printed systems.

Layout of the full state vector used by ``general_rhs``::

    0 beta0  1 beta1  2 beta2  3 beta3  4 v6  5 v8  6 gamma  7 chi
    8 v0     9 v1    10 v3    11 v4

Indices 0-7 form the coefficient state; 8-11 are the linear auxiliary value
coefficients which never feed back into indices 1-7.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import root

from .errors import ChiSaturated, DenominatorDegenerate, NoStaticEquilibrium, SingularMatching
from ._matching import CHI_SATURATED as CHI_SATURATED_CODE
from ._matching import NO_SIGNAL, REGIME_CODE, SINGULAR, match, match_batch, spec_vector
from .learning import ChiConstants, chi_closed_form
from .payoffs import GameParams, PayoffSpec, myopic_response, on_path_alpha, terminal_coefficients

CHI_CAP = 1.0 - 1e-10
DEN_TOL = 1e-12

B0, B1, B2, B3, V6, V8, GAMMA, CHI, V0, V1, V3, V4 = range(12)
CORE = slice(0, 8)

# monomial order of quadratic polynomials in (θ, m, ℓ)
MONOMIALS = ("1", "theta", "m", "l", "theta2", "m2", "l2", "theta_m", "theta_l", "m_l")


@dataclass(frozen=True)
class CoefficientState:
    beta0: float
    beta1: float
    beta2: float
    beta3: float
    v6: float
    v8: float
    gamma: float
    chi: float

    @property
    def alpha3(self):
        return self.beta3 + self.beta1 * self.chi

    def as_array(self) -> np.ndarray:
        return np.array([self.beta0, self.beta1, self.beta2, self.beta3, self.v6, self.v8, self.gamma, self.chi])

    @classmethod
    def from_array(cls, y) -> "CoefficientState":
        return cls(*(float(x) for x in y[:8]))


@dataclass(frozen=True)
class TildeState:
    tv6: float
    tv8: float
    beta1: float
    tbeta2: float
    beta3: float
    gamma: float
    chi: float

    def as_array(self) -> np.ndarray:
        return np.array([self.tv6, self.tv8, self.beta1, self.tbeta2, self.beta3, self.gamma, self.chi])


@dataclass(frozen=True)
class TerminalPayoffSpec:
    """Ψ(â_T) = psi0 + psi1·â_T + psi2·â_T², in raw payoff units."""

    psi0: float = 0.0
    psi1: float = 0.0
    psi2: float = 0.0

    @property
    def is_zero(self) -> bool:
        return self.psi0 == 0.0 and self.psi1 == 0.0 and self.psi2 == 0.0


NO_TERMINAL_PAYOFF = TerminalPayoffSpec()


@dataclass(frozen=True)
class TerminalState:
    beta: np.ndarray  # (β0, β1, β2, β3)
    delta: np.ndarray  # (δ0, δ1, δ2)
    v: np.ndarray  # v0..v9, raw units
    iterations: int = 0
    residual: float = 0.0

    def state_vector(self, gamma_T, chi_T) -> np.ndarray:
        """Full 12-component state at the horizon."""
        v = self.v
        return np.array([*self.beta, v[6], v[8], gamma_T, chi_T, v[0], v[1], v[3], v[4]])


def to_tilde(y, *, beta2_index=B2):
    """(ṽ6, ṽ8, β1, β̃2, β3, γ, χ) from the general layout."""
    gamma, chi = y[GAMMA], y[CHI]
    return np.array([
        y[V6] * gamma / (1.0 - chi) ** 2,
        y[V8] * gamma / (1.0 - chi),
        y[B1],
        y[beta2_index] / (1.0 - chi),
        y[B3],
        gamma,
        chi,
    ])


def from_tilde(z):
    """Inverse of ``to_tilde`` on the coefficient block (β0 set to zero)."""
    tv6, tv8, b1, tb2, b3, gamma, chi = z
    return np.array([0.0, b1, tb2 * (1.0 - chi), b3, tv6 * (1.0 - chi) ** 2 / gamma, tv8 * (1.0 - chi) / gamma, gamma, chi])


# ---------------------------------------------------------------- printed systems

def field_public_backward(state, params: GameParams) -> np.ndarray:
    """Backward-time (β0, β1, β3, γ) system when the myopic belief is public."""
    b0, b1, b3, gamma = state
    r, sy2 = params.r, params.sigma_Y**2
    return b3 * np.array([
        -2.0 * r * b0,
        r * (1.0 - 2.0 * b1) - b1 * b3 * gamma / sy2,
        r * (1.0 - 2.0 * b3) + b1 * b3 * gamma / sy2,
        b3 * gamma * gamma / sy2,
    ])


def field_nofeedback_backward(state, params: GameParams) -> np.ndarray:
    """Backward-time (β0, β1, β3, γ) system without public-signal feedback.

    Here β0 is the weight on the prior mean μ, and χ = 1 - γ/γ⁰.
    """
    b0, b1, b3, gamma = state
    r, sy2 = params.r, params.sigma_Y**2
    chi = 1.0 - gamma / params.gamma0
    alpha = b3 + b1 * chi
    pref = alpha / (2.0 * sy2)
    return np.array([
        pref * (-2.0 * r * sy2 * b0 * (2.0 - chi) + r * sy2 * (1.0 - chi) - 2.0 * gamma * b1 * b1 * (1.0 - chi)),
        pref * (r * sy2 - 2.0 * b1 * (b3 * gamma + r * sy2 * (2.0 - chi)) + 2.0 * b1 * b1 * gamma * (1.0 - chi)),
        pref * (r * sy2 * (2.0 - chi) + 2.0 * b3 * (b1 * gamma - r * sy2 * (2.0 - chi))),
        alpha * alpha * gamma * gamma / sy2,
    ])


def field_private_interior(state, params: GameParams, chi_map: ChiConstants) -> np.ndarray:
    """Forward-time (v6, v8, β1, β2, β3, γ) leadership system for r = 0.

    Accepts a (6,) state or a (6, n) batch of states.
    """
    v6, v8, b1, b2, b3, gamma = state
    chi = chi_closed_form(gamma, chi_map, params.gamma0)
    if np.ndim(chi) == 0:
        if chi >= CHI_CAP:
            raise ChiSaturated(f"chi = {chi} too close to one")
    else:
        # batched columns: saturated entries become NaN instead of raising
        chi = np.where(chi >= CHI_CAP, np.nan, chi)
    sx2, sy2 = params.sigma_X**2, params.sigma_Y**2
    a = b3 + b1 * chi
    om = 1.0 - chi
    drift_l = a * a * gamma * chi / (sx2 * om)
    pref = a * gamma / (2.0 * sx2 * sy2 * om)
    dv6 = b2 * b2 + 2.0 * b1 * b2 * om - b1 * b1 * om * om + 2.0 * v6 * drift_l
    dv8 = -2.0 * b2 - 2.0 * (1.0 - 2.0 * a) * b1 * om - 4.0 * b1 * b1 * chi * om + v8 * drift_l
    db1 = pref * (
        2.0 * sx2 * (a - b1) * b1 * om
        - a * a * b1 * gamma * chi * v8
        - 2.0 * sy2 * a * chi * (b2 - b1 * (om - 2.0 * b2 * chi))
    )
    db2 = pref * (
        2.0 * sx2 * b1 * b1 * om * om
        + 2.0 * sy2 * a * b2 * chi * chi * (1.0 - 2.0 * b2)
        - a * a * gamma * chi * (2.0 * v6 + b2 * v8)
    )
    db3 = pref * (
        -2.0 * sx2 * b1 * om * b3
        + 2.0 * sy2 * a * b2 * chi * chi * (1.0 - 2.0 * b3)
        - a * a * b3 * gamma * chi * v8
    )
    dgamma = -gamma * gamma * a * a / sy2
    return np.array([dv6, dv8, db1, db2, db3, dgamma])


def _common_value_terms(z, uth, uaa, sx2, sy2):
    """Numerators of the tilde system, grouped term by term.

    Returns per-equation lists of terms whose sum is the bracketed expression,
    plus the shared denominator factor. Keeping the terms separate lets the
    certificate bound each one by the triangle inequality.
    """
    tv6, tv8, b1, tb2, b3, gamma, chi = z
    a = b3 + b1 * chi
    d1 = uth + uaa * a  # myopic weight on M̂
    d1sq = d1 * d1
    v6_terms = [-b1 * b1, 2.0 * b1 * tb2, tb2 * tb2, tv6 * a * a / sy2, 2.0 * tv6 * d1sq * chi / sx2]
    v8_terms = [(-2.0 + 4.0 * a) * b1, -2.0 * tb2, tv8 * d1sq * chi / sx2, -4.0 * b1 * b1 * chi]
    b1_terms = [
        2.0 * sx2 * a * (d1sq - a * d1),
        4.0 * sx2 * a * b1 * (a - b1),
        tv8 * a * chi * d1sq * (uth - 2.0 * b1),
        4.0 * b1 * chi * (uth * uth * sy2 + uth * a * (uth * sx2 + 2.0 * uaa * sy2 - sx2 * b1)),
        4.0 * uaa * b1 * a * a * chi * (2.0 * uth * sx2 + uaa * sy2 + sx2 * a * (uaa - 1.0)),
        -4.0 * sy2 * d1sq * tb2 * chi,
        4.0 * sy2 * d1sq * b1 * (uth - 2.0 * tb2) * chi * chi,
    ]
    b2_terms = [
        2.0 * sx2 * a * (uth * uth + 2.0 * b1 * b1 + a * (uth * (2.0 * uaa - 1.0) + 2.0 * tb2)),
        2.0 * sx2 * a**3 * uaa * (uaa - 1.0),
        a * chi * d1sq * (-4.0 * tv6 + tv8 * (uth - 2.0 * tb2)),
        4.0 * a * chi * sx2 * (uth * b1 * b1 + (uth * uth + uaa * a * (2.0 * uth + (uaa - 1.0) * a)) * tb2),
        -4.0 * d1sq * (uth * tv6 * a + sy2 * tb2 * (-uth + 2.0 * tb2)) * chi * chi,
    ]
    b3_terms = [
        -4.0 * sx2 * a * a * b1,
        -chi * chi * (tv8 * a * d1sq * (uth - 2.0 * b1)),
        2.0 * a * chi * d1 * (-uth * sx2 + sx2 * a * (2.0 * uth + (uaa - 1.0) * (2.0 * a - 1.0))),
        -2.0 * a * a * chi * tv8 * d1sq,
        -2.0 * a * chi * (2.0 * uth * sx2 * a * b1 - 2.0 * sx2 * b1 * b1),
        -4.0 * sx2 * chi * chi * a * b1 * (uth * a * (2.0 * uaa - 1.0) + uaa * a * a * (uaa - 1.0) + uth * (uth - b1)),
        -4.0 * sy2 * chi * chi * d1sq * (-1.0 + 2.0 * a) * tb2,
        8.0 * sy2 * d1sq * b1 * tb2 * chi**3,
    ]
    return v6_terms, v8_terms, b1_terms, b2_terms, b3_terms, 4.0 * sx2 * sy2 * (1.0 + uth * chi)


def field_common_value(state, spec: PayoffSpec, params: GameParams) -> np.ndarray:
    """Forward-time tilde system (ṽ6, ṽ8, β1, β̃2, β3, γ, χ) for the leader payoff."""
    z = np.asarray(state, dtype=float)
    tv6, tv8, b1, tb2, b3, gamma, chi = z
    uth, uaa = spec.uhat_hatatheta, spec.uhat_hataa
    sx2, sy2 = params.sigma_X**2, params.sigma_Y**2
    if abs(1.0 + uth * chi) < DEN_TOL:
        raise DenominatorDegenerate(f"1 + û_âθ·χ = {1.0 + uth * chi}")
    v6_t, v8_t, b1_t, b2_t, b3_t, den = _common_value_terms(z, uth, uaa, sx2, sy2)
    a = b3 + b1 * chi
    d1 = uth + uaa * a
    return np.array([
        gamma * sum(v6_t),
        gamma * sum(v8_t),
        gamma * sum(b1_t) / den,
        gamma * sum(b2_t) / den,
        gamma * sum(b3_t) / den,
        -a * a * gamma * gamma / sy2,
        gamma * (a * a * (1.0 - chi) / sy2 - d1 * d1 * chi * chi / sx2),
    ])


# ---------------------------------------------------------------- HJB matching

def _sym_outer(p, q):
    """Product of two affine forms over (1, θ, m, ℓ) as a symmetric 4x4 matrix."""
    o = np.outer(p, q)
    return 0.5 * (o + o.T)


def _to_monomials(S):
    """Symmetric matrix over (1, θ, m, ℓ) to coefficients in MONOMIALS order."""
    return np.array([
        S[0, 0], 2.0 * S[0, 1], 2.0 * S[0, 2], 2.0 * S[0, 3],
        S[1, 1], S[2, 2], S[3, 3], 2.0 * S[1, 2], 2.0 * S[1, 3], 2.0 * S[2, 3],
    ])


def _from_monomials(v):
    """Inverse of ``_to_monomials``."""
    return np.array([
        [v[0], 0.5 * v[1], 0.5 * v[2], 0.5 * v[3]],
        [0.5 * v[1], v[4], 0.5 * v[7], 0.5 * v[8]],
        [0.5 * v[2], 0.5 * v[7], v[5], 0.5 * v[9]],
        [0.5 * v[3], 0.5 * v[8], 0.5 * v[9], v[6]],
    ])


@lru_cache(maxsize=64)
def _payoff_matrix(spec: PayoffSpec) -> np.ndarray:
    """Normalized U as a quadratic form in (a, â, θ, 1)."""
    Q = np.zeros((4, 4))
    entries = {
        (0, 0): -0.5, (0, 2): spec.u_atheta, (0, 1): spec.u_ahata, (1, 1): 0.5 * spec.u_hatahata,
        (0, 3): spec.u0, (1, 2): spec.u_hatatheta, (1, 3): spec.u_hata,
        (2, 2): 0.5 * spec.u_thetatheta, (2, 3): spec.u_theta,
    }
    for (i, j), w in entries.items():
        if i == j:
            Q[i, i] = w
        else:
            Q[i, j] = Q[j, i] = 0.5 * w
    return Q


def expected_flow_payoff(spec: PayoffSpec, a_aff, ahat_aff, ahat_var):
    """E_t[U/|U_aa|] in MONOMIALS order given affine a and E_t[â] over (1, θ, m, ℓ)."""
    return _to_monomials(_flow_matrix(spec, a_aff, ahat_aff, ahat_var))


def _flow_matrix(spec, a_aff, ahat_aff, ahat_var):
    W = np.array([a_aff, ahat_aff, [0.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]], dtype=float)
    S = W.T @ _payoff_matrix(spec) @ W
    S[0, 0] += 0.5 * spec.u_hatahata * ahat_var
    return S


@lru_cache(maxsize=64)
def _spec_vec(spec: PayoffSpec) -> np.ndarray:
    return spec_vector(spec)


def _match(y, spec: PayoffSpec, params: GameParams):
    y = np.asarray(y, dtype=float)
    out = np.zeros(12)
    poly = np.zeros(10)
    focv = np.zeros(4)
    delta = np.zeros(3)
    status = match(y, _spec_vec(spec), REGIME_CODE[params.regime], float(params.r),
                   float(params.sigma_Y), float(params.sigma_X_value), out, poly, focv, delta)
    if status == CHI_SATURATED_CODE:
        raise ChiSaturated(f"chi = {y[CHI]} too close to one")
    if status == NO_SIGNAL:
        raise SingularMatching("signaling coefficient or variance is zero", float("inf"))
    if status == SINGULAR:
        raise SingularMatching("derivative matching system is singular", float("inf"))
    return out, poly, focv, delta


def foc_value_coefficients(y, spec: PayoffSpec, params: GameParams):
    """Normalized (v2, v5, v7, v9) implied by the first-order condition holding identically."""
    return tuple(_match(_padded(y), spec, params)[2])


def hjb_residual_polynomial(y, spec: PayoffSpec, params: GameParams):
    """Monomial coefficients of rV - Ũ - (drift and diffusion terms), normalized units.

    Along a solution these equal the time derivatives of v0..v9.
    """
    return _match(_padded(y), spec, params)[1]


def _padded(y):
    y = np.asarray(y, dtype=float)
    if len(y) >= 12:
        return y
    full = np.zeros(12)
    full[: len(y)] = y
    return full


def general_rhs(y, spec: PayoffSpec, params: GameParams) -> np.ndarray:
    """Time derivative of the 12-component state by HJB coefficient matching.

    The matching itself runs in a compiled kernel: δ from the myopic reply,
    v2, v5, v7, v9 from the FOC, the ten HJB monomials, then a 4x4 solve for β̇.
    """
    if params.nu != 0:
        raise ValueError("the equilibrium field assumes the public signal drift weight nu = 0")
    return _match(y, spec, params)[0]


def general_rhs_batch(Y, spec: PayoffSpec, params: GameParams) -> np.ndarray:
    """``general_rhs`` over the columns of a (dim, n) array, dim 8 or 12.

    Columns where matching fails come back as NaN instead of raising.
    """
    if params.nu != 0:
        raise ValueError("the equilibrium field assumes the public signal drift weight nu = 0")
    rows = np.ascontiguousarray(np.asarray(Y, dtype=float).T)
    derivs = np.empty_like(rows)
    match_batch(rows, _spec_vec(spec), REGIME_CODE[params.regime], float(params.r),
                float(params.sigma_Y), float(params.sigma_X_value), derivs)
    return derivs.T


def field_general(state: CoefficientState, spec: PayoffSpec, params: GameParams, aux=None) -> np.ndarray:
    """(β̇0, β̇1, β̇2, β̇3, v̇6, v̇8, γ̇, χ̇) by HJB coefficient matching.

    ``aux`` optionally supplies raw (v0, v1, v3, v4); β̇0 depends on v3.
    """
    y = np.zeros(12)
    y[:8] = state.as_array() if isinstance(state, CoefficientState) else np.asarray(state)[:8]
    if aux is not None:
        y[8:] = aux
    return general_rhs(y, spec, params)[:8]


def full_value_coefficients(y, spec: PayoffSpec, params: GameParams) -> np.ndarray:
    """Raw v0..v9 at a full state, with v2, v5, v7, v9 from the FOC."""
    v2, v5, v7, v9 = foc_value_coefficients(y, spec, params)
    s = spec.scale
    public = params.regime == "public"
    return np.array([
        y[V0], y[V1], s * v2, 0.0 if public else y[V3], y[V4],
        s * v5, 0.0 if public else y[V6], s * v7, 0.0 if public else y[V8], 0.0 if public else s * v9,
    ])


# ---------------------------------------------------------------- terminal conditions

def _static_play(spec, chi_T, public):
    beta, _ = terminal_coefficients(spec, chi_T)
    if public:
        # with L = M̂ the weights on M and L merge
        beta = np.array([beta[0], beta[1] + beta[2], 0.0, beta[3]])
    return beta


def _delta_of(spec, beta, chi, public):
    if public:
        return np.array(myopic_response(spec, (beta[0], beta[1], beta[3])))
    return np.array(myopic_response(spec, on_path_alpha(*beta, chi)))


def _terminal_values(spec, term, delta, gamma_T, chi_T, public):
    """Raw v0..v9 of E_T[Ψ(δ0 + δ1·M̂ + δ2·L)]."""
    p0, p1, p2 = term.psi0, term.psi1, term.psi2
    d0, d1, d2 = delta
    v = np.zeros(10)
    if public:
        w = d1 + d2
        v[0] = p0 + p1 * d0 + p2 * d0 * d0
        v[2] = p1 * w + 2.0 * p2 * d0 * w
        v[5] = p2 * w * w
        return v
    v[0] = p0 + p1 * d0 + p2 * d0 * d0 + p2 * d1 * d1 * gamma_T * chi_T
    v[2] = p1 * d1 + 2.0 * p2 * d0 * d1
    v[3] = p1 * d2 + 2.0 * p2 * d0 * d2
    v[5] = p2 * d1 * d1
    v[6] = p2 * d2 * d2
    v[9] = 2.0 * p2 * d1 * d2
    return v


def terminal_state_builder(spec: PayoffSpec, term: TerminalPayoffSpec, gamma_T: float, chi_T: float,
                           params: GameParams, damping: float = 0.5, max_iter: int = 500,
                           tol: float = 1e-12) -> TerminalState:
    """Horizon values of (β, δ, v) solving the time-T first-order condition."""
    public = params.regime == "public"
    if public:
        chi_T = 0.0
    beta = _static_play(spec, chi_T, public)
    delta = _delta_of(spec, beta, chi_T, public)
    if term.is_zero:
        return TerminalState(beta, delta, np.zeros(10))
    s = spec.scale
    sy2 = params.sigma_Y**2

    def target(beta):
        delta = _delta_of(spec, beta, chi_T, public)
        v = _terminal_values(spec, term, delta, gamma_T, chi_T, public) / s
        k = gamma_T * (beta[3] + beta[1] * chi_T) / sy2
        d0, d1, d2 = delta
        return np.array([
            spec.u0 + spec.u_ahata * d0 + k * v[2],
            spec.u_ahata * ((d1 + d2) if public else d1) + 2.0 * k * v[5],
            0.0 if public else spec.u_ahata * d2 + k * v[9],
            spec.u_atheta + k * v[7],
        ])

    def finish(beta, it, residual):
        delta = _delta_of(spec, beta, chi_T, public)
        return TerminalState(beta, delta, _terminal_values(spec, term, delta, gamma_T, chi_T, public), it, residual)

    start = beta.copy()
    residual = np.inf
    for it in range(1, max_iter + 1):
        goal = target(beta)
        residual = float(np.max(np.abs(goal - beta)))
        if not np.isfinite(residual):
            break
        if residual < tol:
            return finish(goal, it, residual)
        beta = (1.0 - damping) * beta + damping * goal
    # strong terminal payoffs make the damped map expansive; fall back to a root finder
    with np.errstate(all="ignore"):
        sol = root(lambda b: target(b) - b, start, method="hybr", tol=1e-14)
    if np.all(np.isfinite(sol.x)):
        residual = float(np.max(np.abs(target(sol.x) - sol.x)))
        if residual < tol:
            return finish(target(sol.x), max_iter + sol.nfev, residual)
    raise NoStaticEquilibrium(residual)
