"""Belief dynamics: posterior variance γ, past-play weight χ, and the public belief L.

The right-hand sides are written with plain arithmetic so they accept floats
or numpy arrays (batched states) alike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroSignalResponse
from .payoffs import GameParams


@dataclass(frozen=True)
class LearningState:
    gamma: float
    chi: float


@dataclass(frozen=True)
class GeneralLearningState:
    gamma1: float
    gamma2: float
    chi: float


@dataclass(frozen=True)
class ChiConstants:
    c1: float
    c2: float
    d: float


@dataclass(frozen=True)
class LCoefficients:
    l0: float
    l1: float
    B: float


def learning_rhs(state, beta1, beta3, delta1, params: GameParams):
    """(dγ/dt, dχ/dt) for drift weight ν = 0.

    The no-feedback sentinel drops the public-signal term and the public
    sentinel freezes χ at zero.
    """
    gamma, chi = state.gamma, state.chi
    alpha3 = beta3 + beta1 * chi
    sy2 = params.sigma_Y**2
    dgamma = -gamma * gamma * alpha3 * alpha3 / sy2
    regime = params.regime
    if regime == "public":
        return dgamma, 0.0 * dgamma
    dchi = gamma * alpha3 * alpha3 * (1.0 - chi) / sy2
    if regime == "interior":
        dchi = dchi - gamma * chi * chi * delta1 * delta1 / params.sigma_X**2
    return dgamma, dchi


def learning_rhs_general(state: GeneralLearningState, beta1, beta3, delta1, params: GameParams):
    """(dγ1, dγ2, dχ) when the public signal drifts with â + ν·a."""
    g1, g2, chi = state.gamma1, state.gamma2, state.chi
    alpha = beta3 + beta1 * chi
    nu = params.nu
    sx2 = params.sigma_X_value**2
    big_sigma = nu * nu / sx2 + 1.0 / params.sigma_Y**2
    cross = nu * g1 * alpha + g2 * delta1
    dg1 = -g1 * g1 * alpha * alpha * big_sigma
    dg2 = -2.0 * g2 * g1 * alpha * alpha * big_sigma + g1 * g1 * alpha * alpha * big_sigma - cross * cross / sx2
    dchi = g1 * alpha * alpha * big_sigma * (1.0 - chi) - (nu * alpha + delta1 * chi) * cross / sx2
    return dg1, dg2, dchi


def chi_constants(uhat_hataa: float, sigma_X: float, sigma_Y: float) -> ChiConstants:
    """Constants of the closed-form χ(γ) when the myopic reply is û_âa·α3."""
    if uhat_hataa == 0:
        raise ZeroSignalResponse("û_âa = 0: use chi_no_feedback instead")
    u2 = uhat_hataa * uhat_hataa
    sx2, sy2 = sigma_X * sigma_X, sigma_Y * sigma_Y
    root = math.sqrt(1.0 / sy2**2 + 4.0 * u2 / (sx2 * sy2))
    pref = sx2 / (2.0 * u2)
    c2 = pref * (root - 1.0 / sy2)
    c1 = pref * (root + 1.0 / sy2)
    d = sy2 * u2 * (c1 + c2) / sx2
    return ChiConstants(c1=c1, c2=c2, d=d)


def chi_closed_form(gamma, constants: ChiConstants, gamma0: float):
    ratio = (np.asarray(gamma, dtype=float) / gamma0) ** constants.d
    c1, c2 = constants.c1, constants.c2
    chi = c1 * c2 * (1.0 - ratio) / (c1 + c2 * ratio)
    return float(chi) if np.ndim(chi) == 0 else chi


def chi_no_feedback(gamma, gamma0: float):
    return 1.0 - gamma / gamma0


def l_dynamics_coefficients(state, delta, sigma_X: float) -> LCoefficients:
    """Drift intercept, drift slope and dX-loading of the public belief L."""
    gamma, chi = state.gamma, state.chi
    delta0, delta1, delta2 = delta
    scale = gamma * chi / (sigma_X * sigma_X * (1.0 - chi))
    return LCoefficients(
        l0=-scale * delta0 * delta1,
        l1=-scale * delta1 * (delta1 + delta2),
        B=scale * delta1,
    )
