"""Payoff primitives: normalization, assumption checks, myopic reply, static terminal play.

All payoffs are quadratic in (a, â, θ). Internally we only carry the
normalized long-run payoff

    U/|U_aa| = -a²/2 + u_aθ·aθ + u_aâ·aâ + u_ââ·â²/2 + u0·a
               + u_âθ·âθ + u_â·â + u_θθ·θ²/2 + u_θ·θ

and the normalized myopic payoff Û/|Û_ââ| = -â²/2 + û_âθ·âθ + û_âa·âa + û0·â + ...
The raw scale |U_aa| is kept so value functions can be reported in raw units.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTerminal, NonConcave

DEGENERACY_TOL = 1e-12

# index order of the quadratic forms handled here
A, AHAT, THETA = 0, 1, 2


class Monitoring(enum.Enum):
    """Exact sentinels for the two limiting monitoring regimes."""

    PUBLIC = "public"  # sigma_X = 0: the myopic belief is effectively public
    NO_FEEDBACK = "nofeedback"  # sigma_X = inf: the long-run player learns nothing

    def __repr__(self):
        return f"Monitoring.{self.name}"


PUBLIC = Monitoring.PUBLIC
NO_FEEDBACK = Monitoring.NO_FEEDBACK


@dataclass(frozen=True)
class PayoffSpec:
    u_atheta: float
    u_ahata: float
    u_hatahata: float
    uhat_hatatheta: float
    uhat_hataa: float
    u0: float = 0.0
    uhat0: float = 0.0
    # terms of U that do not involve a: they shape the value function, not play
    u_hatatheta: float = 0.0
    u_hata: float = 0.0
    u_thetatheta: float = 0.0
    u_theta: float = 0.0
    scale: float = 1.0  # |d²U/da²| of the raw payoff

    def flow_payoff(self, a, ahat, theta):
        """Raw long-run flow payoff U(a, â, θ) up to a constant."""
        norm = (
            -0.5 * a * a
            + self.u_atheta * a * theta
            + self.u_ahata * a * ahat
            + 0.5 * self.u_hatahata * ahat * ahat
            + self.u0 * a
            + self.u_hatatheta * ahat * theta
            + self.u_hata * ahat
            + 0.5 * self.u_thetatheta * theta * theta
            + self.u_theta * theta
        )
        return self.scale * norm


@dataclass(frozen=True)
class GameParams:
    sigma_X: float | Monitoring
    sigma_Y: float
    gamma0: float
    r: float = 0.0
    T: float = 1.0
    mu: float = 0.0
    nu: float = 0.0
    psi: float = 0.0

    def __post_init__(self):
        sx = self.sigma_X
        if not isinstance(sx, Monitoring):
            sx = float(sx)
            if sx == 0.0:
                object.__setattr__(self, "sigma_X", PUBLIC)
            elif math.isinf(sx) and sx > 0:
                object.__setattr__(self, "sigma_X", NO_FEEDBACK)
            elif not sx > 0:
                raise ValueError(f"sigma_X must be positive, got {sx}")
            else:
                object.__setattr__(self, "sigma_X", sx)
        if not self.sigma_Y > 0:
            raise ValueError("sigma_Y must be positive")
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be positive")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not self.r >= 0:
            raise ValueError("r must be nonnegative")
        if not 0.0 <= self.nu <= 1.0:
            raise ValueError("nu must lie in [0, 1]")

    @property
    def regime(self) -> str:
        if self.sigma_X is PUBLIC:
            return "public"
        if self.sigma_X is NO_FEEDBACK:
            return "nofeedback"
        return "interior"

    @property
    def sigma_X_value(self) -> float:
        """Numeric volatility, with the sentinels mapped to 0 and inf."""
        if self.sigma_X is PUBLIC:
            return 0.0
        if self.sigma_X is NO_FEEDBACK:
            return math.inf
        return self.sigma_X

    def replace(self, **changes) -> "GameParams":
        data = {k: getattr(self, k) for k in self.__dataclass_fields__}
        data.update(changes)
        return GameParams(**data)


@dataclass(frozen=True)
class AssumptionReport:
    clause_ii: float
    clause_ii_ok: bool
    clause_iii_myopic_ok: bool
    clause_iii_long_run_ok: bool
    clause_iv: float
    clause_iv_ok: bool
    failures: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return (
            self.clause_ii_ok
            and self.clause_iii_myopic_ok
            and self.clause_iii_long_run_ok
            and self.clause_iv_ok
        )


def quadratic_from_squares(terms):
    """Hessian and origin gradient of sum_k w_k·(c_k·(a, â, θ) + b_k)².

    Each term is (w, c) or (w, c, b) with c a 3-vector.
    """
    hess = np.zeros((3, 3))
    grad = np.zeros(3)
    for term in terms:
        w, c = term[0], np.asarray(term[1], dtype=float)
        b = term[2] if len(term) > 2 else 0.0
        hess += 2.0 * w * np.outer(c, c)
        grad += 2.0 * w * b * c
    return hess, grad


def normalize_payoffs(hess_U, grad_U, hess_Uhat, grad_Uhat) -> PayoffSpec:
    """Divide second-order terms by the magnitude of the own-action curvature.

    Hessians and gradients are over (a, â, θ), gradients taken at the origin.
    """
    hU = np.asarray(hess_U, dtype=float)
    gU = np.asarray(grad_U, dtype=float)
    hV = np.asarray(hess_Uhat, dtype=float)
    gV = np.asarray(grad_Uhat, dtype=float)
    if not hU[A, A] < 0:
        raise NonConcave(f"long-run payoff has d²U/da² = {hU[A, A]} >= 0")
    if not hV[AHAT, AHAT] < 0:
        raise NonConcave(f"myopic payoff has d²Û/dâ² = {hV[AHAT, AHAT]} >= 0")
    s = -hU[A, A]
    sh = -hV[AHAT, AHAT]
    return PayoffSpec(
        u_atheta=hU[A, THETA] / s,
        u_ahata=hU[A, AHAT] / s,
        u_hatahata=hU[AHAT, AHAT] / s,
        uhat_hatatheta=hV[AHAT, THETA] / sh,
        uhat_hataa=hV[AHAT, A] / sh,
        u0=gU[A] / s,
        uhat0=gV[AHAT] / sh,
        u_hatatheta=hU[AHAT, THETA] / s,
        u_hata=gU[AHAT] / s,
        u_thetatheta=hU[THETA, THETA] / s,
        u_theta=gU[THETA] / s,
        scale=s,
    )


def validate_assumptions(spec: PayoffSpec) -> AssumptionReport:
    ii = spec.u_atheta * (spec.u_atheta + spec.u_ahata * spec.uhat_hatatheta)
    iii_myopic = abs(spec.uhat_hatatheta) + abs(spec.uhat_hataa) != 0
    iii_long = abs(spec.u_ahata) + abs(spec.u_hatahata) != 0
    iv = spec.u_ahata * spec.uhat_hataa
    failures = []
    if not ii > 0:
        failures.append("ii")
    if not iii_myopic:
        failures.append("iii-myopic")
    if not iii_long:
        failures.append("iii-long-run")
    if not iv < 1:
        failures.append("iv")
    return AssumptionReport(
        clause_ii=ii,
        clause_ii_ok=ii > 0,
        clause_iii_myopic_ok=iii_myopic,
        clause_iii_long_run_ok=iii_long,
        clause_iv=iv,
        clause_iv_ok=iv < 1,
        failures=tuple(failures),
    )


def on_path_alpha(beta0, beta1, beta2, beta3, chi):
    """On-path weights (α0, α2, α3) on (1, L, θ) implied by M = χθ + (1-χ)L."""
    return beta0, beta2 + beta1 * (1.0 - chi), beta3 + beta1 * chi


def myopic_response(spec: PayoffSpec, alpha):
    """Myopic reply weights (δ0, δ1, δ2) on (1, M̂, L) to the conjecture α0 + α2·L + α3·θ."""
    alpha0, alpha2, alpha3 = alpha
    delta0 = spec.uhat0 + spec.uhat_hataa * alpha0
    delta1 = spec.uhat_hatatheta + spec.uhat_hataa * alpha3
    delta2 = spec.uhat_hataa * alpha2
    return delta0, delta1, delta2


def terminal_coefficients(spec: PayoffSpec, chi_T: float):
    """Static Nash weights at the horizon when there is no terminal payoff."""
    if not 0.0 <= chi_T < 1.0:
        raise ValueError(f"chi_T must lie in [0, 1), got {chi_T}")
    k = spec.u_ahata * spec.uhat_hataa
    den_full = 1.0 - k
    den_chi = 1.0 - k * chi_T
    if abs(den_full) < DEGENERACY_TOL or abs(den_chi) < DEGENERACY_TOL:
        raise DegenerateTerminal(f"static best replies are parallel (u_aâ·û_âa = {k})")
    signal = spec.u_atheta * spec.uhat_hataa + spec.uhat_hatatheta
    beta0 = (spec.u0 + spec.u_ahata * spec.uhat0) / den_full
    beta1 = spec.u_ahata * signal / den_chi
    beta2 = spec.u_ahata**2 * spec.uhat_hataa * signal * (1.0 - chi_T) / (den_full * den_chi)
    beta3 = spec.u_atheta
    beta = np.array([beta0, beta1, beta2, beta3])
    delta = np.array(myopic_response(spec, on_path_alpha(beta0, beta1, beta2, beta3, chi_T)))
    return beta, delta


# Canonical payoff families used by the scenarios and the tests.

def leadership_spec() -> PayoffSpec:
    """Leader U = -(a-θ)² - (a-â)², follower Û = -(â-a)²."""
    hU, gU = quadratic_from_squares([(-1.0, (1, 0, -1)), (-1.0, (1, -1, 0))])
    hV, gV = quadratic_from_squares([(-1.0, (-1, 1, 0))])
    return normalize_payoffs(hU, gU, hV, gV)


def common_value_spec(lam: float) -> PayoffSpec:
    """Leader as in leadership_spec, follower Û = -λ(â-θ)² - (1-λ)(â-a)²."""
    hU, gU = quadratic_from_squares([(-1.0, (1, 0, -1)), (-1.0, (1, -1, 0))])
    hV, gV = quadratic_from_squares([(-lam, (0, 1, -1)), (-(1.0 - lam), (-1, 1, 0))])
    return normalize_payoffs(hU, gU, hV, gV)


def conflict_spec(bias: float = 1.5) -> PayoffSpec:
    """Leader as in leadership_spec, follower Û = -(â - bias·a)²."""
    hU, gU = quadratic_from_squares([(-1.0, (1, 0, -1)), (-1.0, (1, -1, 0))])
    hV, gV = quadratic_from_squares([(-1.0, (-bias, 1, 0))])
    return normalize_payoffs(hU, gU, hV, gV)


def reputation_spec() -> PayoffSpec:
    """Long-run U = -(a-θ)², myopic Û = -(â-θ)²."""
    hU, gU = quadratic_from_squares([(-1.0, (1, 0, -1))])
    hV, gV = quadratic_from_squares([(-1.0, (0, 1, -1))])
    return normalize_payoffs(hU, gU, hV, gV)
