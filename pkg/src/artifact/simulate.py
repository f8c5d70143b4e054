"""Monte-Carlo simulation of equilibrium play and checks of the filtering identities.

Paths are stepped by Euler–Maruyama, vectorized across paths. The state is
(M, D, L) with D = M̂ - M. D and the innovation Z of the public signal do not
depend on the long-run player's action, so deviation runs that share a seed
share Z exactly, and M̂ = M + D reproduces the myopic player's filter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .assemble import EquilibriumSolution
from .errors import GridMismatch
from .payoffs import GameParams, PayoffSpec

SERIES = ("a", "ahat", "Y", "X", "Mhat", "M", "L", "Z")


@dataclass
class FilterCoefficients:
    """Coefficients of dM̂ = (κ0 + κ1·a + κ2·M̂)dt + BX·dZ^X + BY·dZ^Y on the solution grid.

    κ0 depends on L: κ0_t = kappa0 + kappa0_L·L_t.
    """

    t: np.ndarray
    kappa0: np.ndarray
    kappa0_L: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    BX: np.ndarray
    BY: np.ndarray


def filter_coefficients(solution: EquilibriumSolution, params: GameParams | None = None) -> FilterCoefficients:
    params = params or solution.params
    c = solution.coefficients
    a0, a2, a3 = c.alpha.T
    sx = params.sigma_X_value
    if 0.0 < sx < np.inf:
        Sigma = params.nu**2 / sx**2 + 1.0 / params.sigma_Y**2
        bx = params.nu * a3 * c.gamma / sx
    else:
        Sigma = 1.0 / params.sigma_Y**2
        bx = np.zeros_like(a3)
    k1 = a3 * c.gamma * Sigma
    return FilterCoefficients(c.t, -k1 * a0, -k1 * a2, k1, -a3 * k1, bx, a3 * c.gamma / params.sigma_Y)


Deviation = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray] | Sequence[float] | None


@dataclass
class SimulatedEnsemble:
    n_paths: int
    dt: float
    seed: int
    theta: np.ndarray  # (n_paths,)
    record_t: np.ndarray  # (n_records,)
    series: dict  # name -> (n_records, n_paths)
    payoff: np.ndarray  # discounted long-run payoff per path, terminal payoff included
    coordination: np.ndarray  # undiscounted ∫(a - â)² dt per path
    adaptation: np.ndarray  # undiscounted ∫(a - θ)² dt per path
    representation_max: float  # sup over paths and steps of |M - χθ - (1-χ)L|
    onpath_identity_max: float  # sup |a - α0 - α2·L - α3·θ|
    gamma_rec: np.ndarray
    chi_rec: np.ndarray
    solution: EquilibriumSolution = field(repr=False, default=None)
    params: GameParams = field(repr=False, default=None)
    deviation: object = field(repr=False, default=None)
    theta_mode: object = "drawn"
    substeps: int = 1


def _substeps(solution: EquilibriumSolution, dt: float) -> tuple[int, float]:
    t = solution.t
    h = t[1] - t[0]
    if not np.allclose(np.diff(t), h, rtol=1e-9, atol=0.0):
        raise GridMismatch("the solution grid is not uniform")
    k = h / dt
    kr = round(k)
    if kr < 1 or abs(k - kr) > 1e-9 * max(1.0, k):
        raise GridMismatch(f"dt = {dt} does not divide the grid spacing {h}")
    return kr, h / kr


def _fine_coefficients(solution: EquilibriumSolution, k: int):
    """Coefficient arrays on the simulation grid by linear interpolation between nodes."""
    c = solution.coefficients
    t = solution.t
    n = (len(t) - 1) * k + 1
    tf = np.linspace(t[0], t[-1], n)
    cols = {
        "b0": c.beta[:, 0], "b1": c.beta[:, 1], "b2": c.beta[:, 2], "b3": c.beta[:, 3],
        "a0": c.alpha[:, 0], "a2": c.alpha[:, 1], "a3": c.alpha[:, 2],
        "d0": c.delta[:, 0], "d1": c.delta[:, 1], "d2": c.delta[:, 2],
        "gamma": c.gamma, "chi": c.chi,
    }
    return tf, {name: np.interp(tf, t, v) for name, v in cols.items()}


def _action_rule(deviation: Deviation):
    """Return a(t_index, t, M, L, θ, coeffs) or None for on-path play."""
    if deviation is None:
        return None
    if callable(deviation):
        return lambda i, t, M, L, th, cf: np.broadcast_to(np.asarray(deviation(t, M, L, th), dtype=float), M.shape)
    mult = 1.0 + np.asarray(deviation, dtype=float)
    if mult.shape != (4,):
        raise ValueError("deviation offsets must have four entries (β0, β1, β2, β3)")

    def rule(i, t, M, L, th, cf):
        return (mult[0] * cf["b0"][i] + mult[1] * cf["b1"][i] * M + mult[2] * cf["b2"][i] * L
                + mult[3] * cf["b3"][i] * th)

    return rule


def simulate_paths(solution: EquilibriumSolution, params: GameParams | None = None, n_paths: int = 1000,
                   dt: float | None = None, seed: int = 0, theta_mode="drawn", deviation: Deviation = None,
                   n_records: int = 51, substeps: int = 1) -> SimulatedEnsemble:
    """Simulate ``n_paths`` equilibrium histories.

    ``theta_mode`` is "drawn" (θ ~ N(μ, γ⁰)) or a number. ``deviation`` is
    None (equilibrium play), four multiplicative offsets on (β0..β3), or a
    callable a(t, M, L, θ). Brownian increments are drawn at dt/substeps and
    summed, so a run at dt with substeps=2 shares its noise with a run at dt/2.
    """
    params = params or solution.params
    spec: PayoffSpec = solution.spec
    dt = float(solution.t[1] - solution.t[0]) if dt is None else float(dt)
    k, dt = _substeps(solution, dt)
    tf, cf = _fine_coefficients(solution, k)
    n_steps = len(tf) - 1
    rng = np.random.Generator(np.random.Philox(seed))
    regime = params.regime
    sx, sy = params.sigma_X, params.sigma_Y
    r = params.r
    rule = _action_rule(deviation)

    if theta_mode == "drawn":
        theta = params.mu + np.sqrt(params.gamma0) * rng.standard_normal(n_paths)
    else:
        theta = np.full(n_paths, float(theta_mode))
    M = np.full(n_paths, params.mu)
    D = np.zeros(n_paths)
    L = np.full(n_paths, params.mu)
    Y = np.zeros(n_paths)
    X = np.zeros(n_paths)
    Z = np.zeros(n_paths)
    payoff = np.zeros(n_paths)
    coord = np.zeros(n_paths)
    adapt = np.zeros(n_paths)
    rep_max = 0.0
    onpath_max = 0.0

    n_rec = max(int(n_records), 0)
    rec_idx = np.unique(np.linspace(0, n_steps, n_rec).round().astype(int)) if n_rec else np.array([], int)
    series = {name: np.empty((len(rec_idx), n_paths)) for name in SERIES}
    rec_pos = {int(j): p for p, j in enumerate(rec_idx)}

    def play(i):
        Mhat = M + D
        if rule is None:
            a = cf["a0"][i] + cf["a2"][i] * L + cf["a3"][i] * theta
        else:
            a = rule(i, tf[i], M, L, theta, cf)
        ahat = cf["d0"][i] + cf["d1"][i] * Mhat + cf["d2"][i] * L
        return a, ahat, Mhat

    def flows(i, a, ahat):
        u = spec.flow_payoff(a, ahat, theta) * np.exp(-r * tf[i])
        return u, (a - ahat) ** 2, (a - theta) ** 2

    a, ahat, Mhat = play(0)
    u_prev, c_prev, ad_prev = flows(0, a, ahat)
    sqrt_sub = np.sqrt(dt / substeps)
    for i in range(n_steps + 1):
        chi_i = cf["chi"][i]
        rep = np.max(np.abs(M - chi_i * theta - (1.0 - chi_i) * L))
        rep_max = max(rep_max, float(rep))
        if rule is None:
            onpath_max = max(onpath_max, float(np.max(np.abs(a - (cf["a0"][i] + cf["a2"][i] * L + cf["a3"][i] * theta)))))
        if i in rec_pos:
            p = rec_pos[i]
            for name, arr in zip(SERIES, (a, ahat, Y, X, Mhat, M, L, Z)):
                series[name][p] = arr
        if i == n_steps:
            break

        dW = np.zeros((2, n_paths))
        for _ in range(substeps):
            dW += rng.standard_normal((2, n_paths))
        dW *= sqrt_sub
        dWY, dWX = dW

        g, chi = cf["gamma"][i], chi_i
        a0, a2, a3 = cf["a0"][i], cf["a2"][i], cf["a3"][i]
        d1 = cf["d1"][i]
        k1 = a3 * g / sy**2
        dY = a * dt + sy * dWY
        if regime == "public":
            Mhat_new = Mhat + k1 * (dY - (a0 + a2 * Mhat + a3 * Mhat) * dt)
            dX = ahat * dt
            dZ = dWX
            M = Mhat_new
            L = Mhat_new
            D = np.zeros(n_paths)
        else:
            if regime == "interior":
                dZ = dWX + d1 * D * dt / sx
                dX = ahat * dt + sx * dWX
                load = chi * g * d1 / sx
                scale = g * chi / (sx * sx * (1.0 - chi))
                l0 = -scale * cf["d0"][i] * d1
                l1 = -scale * d1 * (d1 + cf["d2"][i])
                B = scale * d1
            else:
                # σ_X = ∞: X carries no information; its stored series is the drift alone
                dZ = dWX
                dX = ahat * dt
                load = 0.0
                l0 = l1 = B = 0.0
            M_new = M + k1 * (a - a0 - a2 * L - a3 * M) * dt + load * dZ
            D = D - a3 * k1 * D * dt + (a3 * g / sy) * dWY - load * dZ
            L = L + (l0 + l1 * L) * dt + B * dX
            M = M_new
        Y = Y + dY
        X = X + dX
        Z = Z + dZ

        a, ahat, Mhat = play(i + 1)
        u_new, c_new, ad_new = flows(i + 1, a, ahat)
        payoff += 0.5 * dt * (u_prev + u_new)
        coord += 0.5 * dt * (c_prev + c_new)
        adapt += 0.5 * dt * (ad_prev + ad_new)
        u_prev, c_prev, ad_prev = u_new, c_new, ad_new

    term = solution.term
    if not term.is_zero:
        payoff += np.exp(-r * tf[-1]) * (term.psi0 + term.psi1 * ahat + term.psi2 * ahat * ahat)

    return SimulatedEnsemble(
        n_paths=n_paths, dt=dt, seed=seed, theta=theta, record_t=tf[rec_idx], series=series,
        payoff=payoff, coordination=coord, adaptation=adapt, representation_max=rep_max,
        onpath_identity_max=onpath_max, gamma_rec=cf["gamma"][rec_idx], chi_rec=cf["chi"][rec_idx],
        solution=solution, params=params, deviation=deviation, theta_mode=theta_mode, substeps=substeps,
    )


@dataclass
class RepresentationReport:
    error: float  # of the ensemble itself
    error_coarse: float  # at dt, noise drawn at dt/2
    error_fine: float  # at dt/2, same noise
    ratio: float


def representation_error(ensemble: SimulatedEnsemble) -> RepresentationReport:
    """Sup |M - χθ - (1-χ)L| and its ratio across paired dt and dt/2 runs."""
    common = dict(params=ensemble.params, n_paths=ensemble.n_paths, seed=ensemble.seed,
                  theta_mode=ensemble.theta_mode, deviation=ensemble.deviation, n_records=0)
    coarse = simulate_paths(ensemble.solution, dt=ensemble.dt, substeps=2, **common)
    fine = simulate_paths(ensemble.solution, dt=ensemble.dt / 2.0, substeps=1, **common)
    ec, ef = coarse.representation_max, fine.representation_max
    ratio = ec / ef if ef > 0 else (np.inf if ec > 0 else 1.0)
    return RepresentationReport(ensemble.representation_max, ec, ef, ratio)


@dataclass
class MomentCheck:
    t: np.ndarray
    sample_var: np.ndarray
    model_var: np.ndarray
    z: np.ndarray
    passes: bool


def second_moment_check(ensemble: SimulatedEnsemble, solution: EquilibriumSolution | None = None,
                        z_max: float = 4.0) -> MomentCheck:
    """Cross-sectional Var(M - M̂) against γχ at the recorded times."""
    diff = ensemble.series["M"] - ensemble.series["Mhat"]
    n = diff.shape[1]
    s2 = diff.var(axis=1, ddof=1)
    model = ensemble.gamma_rec * ensemble.chi_rec
    se = s2 * np.sqrt(2.0 / (n - 1))
    gap = s2 - model
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, gap / se, np.where(np.abs(gap) < 1e-10, 0.0, np.inf))
    return MomentCheck(ensemble.record_t, s2, model, z, bool(np.all(np.abs(z) <= z_max)))


def filter_bias(ensemble: SimulatedEnsemble) -> np.ndarray:
    """z-scores of the cross-sectional mean of θ - M̂ at the recorded times."""
    e = ensemble.theta[None, :] - ensemble.series["Mhat"]
    se = e.std(axis=1, ddof=1) / np.sqrt(e.shape[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(se > 0, e.mean(axis=1) / se, 0.0)


@dataclass
class PayoffEstimate:
    mean: float
    se: float
    coordination_mean: float
    coordination_se: float
    adaptation_mean: float
    adaptation_se: float


def _mean_se(x):
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(len(x)))


def payoff_estimate(ensemble: SimulatedEnsemble) -> PayoffEstimate:
    """Mean discounted long-run payoff with its standard error, plus the
    undiscounted coordination ∫(a-â)² and adaptation ∫(a-θ)² costs."""
    m, s = _mean_se(ensemble.payoff)
    cm, cs = _mean_se(ensemble.coordination)
    am, as_ = _mean_se(ensemble.adaptation)
    return PayoffEstimate(m, s, cm, cs, am, as_)


def ex_ante_value(solution: EquilibriumSolution) -> float:
    """E[V_0(θ, μ, μ)] with θ ~ N(μ, γ⁰), from the value-function coefficients."""
    p = solution.params
    v = solution.value.v[0]
    mu, g0 = p.mu, p.gamma0
    e_th, e_th2 = mu, mu * mu + g0
    return float(v[0] + v[1] * e_th + (v[2] + v[3]) * mu + v[4] * e_th2 + (v[5] + v[6] + v[9]) * mu * mu
                 + (v[7] + v[8]) * mu * e_th)


@dataclass
class ProbeRow:
    label: str
    offsets: tuple
    mean: float
    se: float
    gain: float  # perturbed minus equilibrium, path by path
    gain_se: float
    equilibrium_weakly_best: bool


def default_perturbations(size: float = 0.1) -> list:
    out = []
    for j in (1, 2, 3):
        for sgn in (1.0, -1.0):
            o = [0.0, 0.0, 0.0, 0.0]
            o[j] = sgn * size
            out.append(tuple(o))
    out.append((0.0, size, size, size))
    out.append((0.0, -size, -size, -size))
    return out


def best_response_probe(solution: EquilibriumSolution, params: GameParams | None = None,
                        perturbations: Sequence[Sequence[float]] | None = None, n_paths: int = 10_000,
                        seed: int = 0, dt: float | None = None) -> list:
    """Payoff of equilibrium play against multiplicative β perturbations, same draws.

    The first row is the unperturbed strategy run through the same deviation
    machinery, so the comparison isolates the strategy change.
    """
    params = params or solution.params
    perturbations = default_perturbations() if perturbations is None else perturbations
    base = simulate_paths(solution, params, n_paths, dt, seed, deviation=(0.0, 0.0, 0.0, 0.0), n_records=0)
    bm, bs = _mean_se(base.payoff)
    rows = [ProbeRow("equilibrium", (0.0, 0.0, 0.0, 0.0), bm, bs, 0.0, 0.0, True)]
    for off in perturbations:
        off = tuple(float(x) for x in off)
        ens = simulate_paths(solution, params, n_paths, dt, seed, deviation=off, n_records=0)
        m, s = _mean_se(ens.payoff)
        gm, gs = _mean_se(ens.payoff - base.payoff)
        label = "beta" + "".join(f"{j}{'+' if o > 0 else '-'}" for j, o in enumerate(off) if o != 0.0)
        rows.append(ProbeRow(label, off, m, s, gm, gs, bool(gm <= 3.0 * gs)))
    return rows
