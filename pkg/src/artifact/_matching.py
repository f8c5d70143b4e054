"""Compiled HJB coefficient matching used by ``fields.general_rhs``.

Quadratics in (θ, m, ℓ) are held as symmetric 4x4 matrices over the basis
(1, θ, m, ℓ). The payoff is a quadratic form in (a, â, θ, 1).
"""

from __future__ import annotations

import numpy as np
from numba import njit

REGIME_PUBLIC, REGIME_INTERIOR, REGIME_NOFEEDBACK = 0, 1, 2
REGIME_CODE = {"public": REGIME_PUBLIC, "interior": REGIME_INTERIOR, "nofeedback": REGIME_NOFEEDBACK}

OK, CHI_SATURATED, SINGULAR, NO_SIGNAL = 0, 1, 2, 3
CHI_CAP = 1.0 - 1e-10


def spec_vector(spec) -> np.ndarray:
    """PayoffSpec fields in the order the kernel expects."""
    return np.array([
        spec.u_atheta, spec.u_ahata, spec.u_hatahata, spec.uhat_hatatheta, spec.uhat_hataa,
        spec.u0, spec.uhat0, spec.u_hatatheta, spec.u_hata, spec.u_thetatheta, spec.u_theta, spec.scale,
    ])


@njit(cache=True)
def _to_monomials(S, out):
    out[0] = S[0, 0]
    out[1] = 2.0 * S[0, 1]
    out[2] = 2.0 * S[0, 2]
    out[3] = 2.0 * S[0, 3]
    out[4] = S[1, 1]
    out[5] = S[2, 2]
    out[6] = S[3, 3]
    out[7] = 2.0 * S[1, 2]
    out[8] = 2.0 * S[1, 3]
    out[9] = 2.0 * S[2, 3]


@njit(cache=True)
def _from_monomials(v):
    S = np.empty((4, 4))
    S[0, 0] = v[0]
    S[1, 1] = v[4]
    S[2, 2] = v[5]
    S[3, 3] = v[6]
    S[0, 1] = S[1, 0] = 0.5 * v[1]
    S[0, 2] = S[2, 0] = 0.5 * v[2]
    S[0, 3] = S[3, 0] = 0.5 * v[3]
    S[1, 2] = S[2, 1] = 0.5 * v[7]
    S[1, 3] = S[3, 1] = 0.5 * v[8]
    S[2, 3] = S[3, 2] = 0.5 * v[9]
    return S


@njit(cache=True)
def _payoff_matrix(c):
    Q = np.zeros((4, 4))
    Q[0, 0] = -0.5
    Q[0, 2] = Q[2, 0] = 0.5 * c[0]
    Q[0, 1] = Q[1, 0] = 0.5 * c[1]
    Q[1, 1] = 0.5 * c[2]
    Q[0, 3] = Q[3, 0] = 0.5 * c[5]
    Q[1, 2] = Q[2, 1] = 0.5 * c[7]
    Q[1, 3] = Q[3, 1] = 0.5 * c[8]
    Q[2, 2] = 0.5 * c[9]
    Q[2, 3] = Q[3, 2] = 0.5 * c[10]
    return Q


@njit(cache=True)
def match(y, c, regime, r, sigma_Y, sigma_X, out, poly, focv, delta):
    """Fill ``out`` (12 time derivatives), ``poly`` (normalized HJB monomials),
    ``focv`` (normalized v2, v5, v7, v9) and ``delta``; return a status code.

    ``y`` may have 8 entries (core only) or 12 (core plus v0, v1, v3, v4).
    """
    u_at, u_aah, w_th, w_a = c[0], c[1], c[3], c[4]
    scale = c[11]
    b0, b1, b2, b3 = y[0], y[1], y[2], y[3]
    gamma = y[6]
    chi = y[7]
    sy2 = sigma_Y * sigma_Y
    public = regime == REGIME_PUBLIC
    if public:
        chi = 0.0
        b2 = 0.0
    elif chi >= CHI_CAP:
        return CHI_SATURATED
    alpha0 = b0
    alpha2 = b2 + b1 * (1.0 - chi)
    alpha3 = b3 + b1 * chi
    d0 = c[6] + w_a * alpha0
    d1 = w_th + w_a * alpha3
    d2 = w_a * alpha2
    delta[0] = d0
    delta[1] = d1
    delta[2] = d2
    k = gamma * alpha3 / sy2
    dgamma = -gamma * gamma * alpha3 * alpha3 / sy2
    a_aff = np.zeros(4)
    ahat_aff = np.zeros(4)
    mu_M = np.zeros(4)
    mu_L = np.zeros(4)
    sig_M = 0.0
    sig_L = 0.0
    dchi = 0.0
    if public:
        # M̂ is public, so L = M = M̂ and the state collapses to (θ, m)
        a_aff[0], a_aff[1], a_aff[2] = b0, b3, b1
        ahat_aff[0], ahat_aff[2] = d0, d1 + d2
        mu_M[1], mu_M[2] = k * b3, -k * b3
        sig_M = gamma * b3 / sigma_Y
    else:
        a_aff[0], a_aff[1], a_aff[2], a_aff[3] = b0, b3, b1, b2
        ahat_aff[0], ahat_aff[2], ahat_aff[3] = d0, d1, d2
        mu_M[1], mu_M[2], mu_M[3] = k * b3, k * (b1 - alpha3), k * (b2 - alpha2)
        dchi = gamma * alpha3 * alpha3 * (1.0 - chi) / sy2
        if regime == REGIME_INTERIOR:
            sig_M = chi * gamma * d1 / sigma_X
            sig_L = sig_M / (1.0 - chi)
            cl = sig_L * d1 / sigma_X
            mu_L[2], mu_L[3] = cl, -cl
            dchi -= gamma * chi * chi * d1 * d1 / (sigma_X * sigma_X)
    if k == 0.0:
        return NO_SIGNAL

    # FOC holding identically: N_j = c_j·k·v_j with N_j affine in β
    n2 = y[0] - c[5] - u_aah * d0
    n7 = y[3] - u_at
    if public:
        n5 = y[1] - u_aah * (d1 + d2)
        n9 = 0.0
    else:
        n5 = y[1] - u_aah * d1
        n9 = y[2] - u_aah * d2
    v2 = n2 / k
    v5 = n5 / (2.0 * k)
    v7 = n7 / k
    v9 = n9 / k
    focv[0], focv[1], focv[2], focv[3] = v2, v5, v7, v9

    full = y.shape[0] >= 12
    v = np.zeros(10)
    v[2], v[5], v[7] = v2, v5, v7
    if full:
        v[0] = y[8] / scale
        v[1] = y[9] / scale
        v[4] = y[11] / scale
    if not public:
        v[6] = y[4] / scale
        v[8] = y[5] / scale
        v[9] = v9
        if full:
            v[3] = y[10] / scale

    W = np.zeros((4, 4))
    W[0, :] = a_aff
    W[1, :] = ahat_aff
    W[2, 1] = 1.0
    W[3, 0] = 1.0
    S = r * _from_monomials(v) - W.T @ _payoff_matrix(c) @ W
    ahat_var = 0.0 if public else d1 * d1 * gamma * chi
    S[0, 0] -= 0.5 * c[2] * ahat_var
    Vm = np.array([v[2], v[7], 2.0 * v[5], v[9]])
    Vl = np.array([v[3], v[8], v[9], 2.0 * v[6]])
    for i in range(4):
        for j in range(4):
            S[i, j] -= 0.5 * (mu_M[i] * Vm[j] + mu_M[j] * Vm[i] + mu_L[i] * Vl[j] + mu_L[j] * Vl[i])
    S[0, 0] -= sig_M * sig_M * v[5] + sig_M * sig_L * v[9] + sig_L * sig_L * v[6]
    _to_monomials(S, poly)

    # Differentiate N_j = c_j·k·v_j in time: grad(N_j)·β̇ + ∂N_j/∂χ·χ̇ = c_j(k̇·v_j + k·v̇_j),
    # with v̇_j = poly_j and k̇ = (γ̇α3 + γ(β̇3 + χβ̇1 + β1χ̇))/σ_Y².
    kk = u_aah * w_a
    A = np.zeros((4, 4))
    rhs = np.zeros(4)
    A[0, 0] = 1.0 - kk
    dn = np.zeros(4)
    if public:
        A[1, 1] = 1.0 - kk
        A[1, 3] = -kk
        A[3, 2] = 1.0
    else:
        A[1, 1] = 1.0 - kk * chi
        A[1, 3] = -kk
        dn[1] = -kk * b1
        A[3, 1] = -kk * (1.0 - chi)
        A[3, 2] = 1.0 - kk
        dn[3] = kk * b1
    A[2, 3] = 1.0
    weights = (1.0, 2.0, 1.0, 1.0)
    targets = (poly[2], poly[5], poly[7], poly[9])
    kdot_known = (dgamma * alpha3 + gamma * b1 * dchi) / sy2
    for j in range(4):
        if public and j == 3:
            continue
        cj = weights[j]
        vj = focv[j]
        A[j, 3] -= cj * vj * gamma / sy2
        A[j, 1] -= cj * vj * gamma * chi / sy2
        rhs[j] = cj * (k * targets[j] + vj * kdot_known) - dn[j] * dchi
    if not np.isfinite(A).all() or not np.isfinite(rhs).all():
        return SINGULAR
    if abs(np.linalg.det(A)) < 1e-300:
        return SINGULAR
    dbeta = np.linalg.solve(A, rhs)
    out[0], out[1], out[2], out[3] = dbeta[0], dbeta[1], dbeta[2], dbeta[3]
    out[6] = dgamma
    out[7] = dchi
    out[8] = scale * poly[0]
    out[9] = scale * poly[1]
    out[11] = scale * poly[4]
    if public:
        out[2] = 0.0
        out[4] = out[5] = out[10] = 0.0
    else:
        out[4] = scale * poly[6]
        out[5] = scale * poly[8]
        out[10] = scale * poly[3]
    return OK


@njit(cache=True)
def match_batch(Y, c, regime, r, sigma_Y, sigma_X, derivs):
    """Row-wise ``match`` over an (n, 8 or 12) array; failed rows become NaN."""
    out = np.zeros(12)
    poly = np.zeros(10)
    focv = np.zeros(4)
    delta = np.zeros(3)
    width = derivs.shape[1]
    for i in range(Y.shape[0]):
        status = match(Y[i], c, regime, r, sigma_Y, sigma_X, out, poly, focv, delta)
        if status == OK:
            for j in range(width):
                derivs[i, j] = out[j]
        else:
            for j in range(width):
                derivs[i, j] = np.nan
