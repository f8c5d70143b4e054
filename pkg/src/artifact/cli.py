"""Batch front end: scenario configs, sweeps, CSV/JSON output and exit codes.

Config files are flat ``key = value`` lines with dotted sections::

    scenario = leadership_interior
    game.sigma_X = 1.0
    game.T = 10
    solver.tol = 1e-9

Exit codes: 0 accepted, 1 bad config, 2 no solution found, 3 verification failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AlphaVanishes, ArtifactError, ConfigError
from .fields import NO_TERMINAL_PAYOFF, TerminalPayoffSpec
from .payoffs import (
    GameParams, PayoffSpec, common_value_spec, conflict_spec, leadership_spec, reputation_spec,
    validate_assumptions,
)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3

SCENARIOS = (
    "leadership_public", "leadership_nofeedback", "leadership_interior", "common_value_lambda",
    "conflict_of_interest", "reputation", "custom_payoffs",
)
SWEEPABLE = ("sigma_X", "r", "lambda", "psi", "gamma0", "T")

CSV_COLUMNS = (
    ["t", "beta0", "beta1", "beta2", "beta3", "alpha0", "alpha2", "alpha3", "delta0", "delta1", "delta2",
     "gamma", "chi"] + [f"v{j}" for j in range(10)]
)
SIM_COLUMNS = ["t", "gamma", "chi", "mean_a", "mean_ahat", "mean_Mhat", "mean_M", "mean_L",
               "var_M_minus_Mhat", "gamma_chi", "z_second_moment", "mean_theta_minus_Mhat"]
DIAGNOSTIC_KEYS = ("scenario", "status", "exit_code", "accepted", "config_hash", "foc_max_residual",
                   "boundary_residuals", "invariant_flags", "telemetry", "notes", "error", "simulation")

PAYOFF_FIELDS = ("u_atheta", "u_ahata", "u_hatahata", "uhat_hatatheta", "uhat_hataa", "u0", "uhat0",
                 "u_hatatheta", "u_hata", "u_thetatheta", "u_theta", "scale")

DEFAULTS = {
    "game.sigma_Y": 1.5, "game.gamma0": 1.0, "game.T": 10.0, "game.r": 0.0, "game.mu": 0.0,
    "solver.tol": 1e-9, "solver.steps_per_unit": 400, "solver.max_iter": 200, "solver.fp_tol": 1e-10,
    "simulation.n_paths": 1000, "simulation.seed": 0, "simulation.n_records": 51,
    "payoff.lambda": 0.5, "payoff.psi": 0.5, "payoff.bias": 1.5,
}
DEFAULT_SIGMA_X = {"leadership_public": 0.0, "leadership_nofeedback": math.inf, "reputation": math.inf}

PRESETS = {
    "figure1_public": {"scenario": "leadership_public"},
    "figure1_nofeedback": {"scenario": "leadership_nofeedback"},
    "figure1_interior": {"scenario": "leadership_interior", "game.sigma_X": 1.0},
    "figure3": {"scenario": "common_value_lambda", "game.sigma_X": 1.0, "game.T": 2.0,
                "sweep.axis": "lambda", "sweep.values": "0,0.5,1"},
    "figure2_r0": {"scenario": "leadership_interior", "game.sigma_X": 1.0, "game.r": 0.0,
                   "sweep.axis": "sigma_X", "sweep.values": "0,0.1,0.75,2,10,inf"},
    "figure2_r1": {"scenario": "leadership_interior", "game.sigma_X": 1.0, "game.r": 1.0,
                   "sweep.axis": "sigma_X", "sweep.values": "0,0.1,0.75,2,10,inf"},
    "horizon": {"scenario": "common_value_lambda", "game.sigma_X": 1.0, "game.T": 3.0, "payoff.lambda": 0.5,
                "sweep.axis": "gamma0", "sweep.values": "0.5,1,2"},
    "reputation": {"scenario": "reputation", "game.sigma_X": math.inf, "payoff.psi": 1.125},
}


# ---------------------------------------------------------------- config

def parse_value(text: str):
    """Numbers (with exponents and inf) become floats; anything else stays text."""
    t = text.strip()
    try:
        return float(t)
    except ValueError:
        return t


def parse_config_text(text: str) -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {n}: empty key")
        out[key] = parse_value(value)
    return out


def config_hash(raw: dict) -> str:
    """Hash of the settings that shape results; the output location is left out."""
    canon = "\n".join(f"{k}={raw[k]!r}" for k in sorted(raw) if k != "output.dir")
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass
class ScenarioConfig:
    scenario: str
    params: GameParams
    spec: PayoffSpec
    term: TerminalPayoffSpec = NO_TERMINAL_PAYOFF
    lam: float | None = None
    psi: float | None = None
    tol: float = 1e-9
    fp_tol: float = 1e-10
    steps_per_unit: int = 400
    max_iter: int = 200
    n_paths: int = 1000
    dt: float | None = None
    seed: int = 0
    n_records: int = 51
    out_dir: str = "out"
    raw: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def _num(raw, key, kind=float):
    v = raw.get(key, DEFAULTS.get(key))
    if v is None:
        raise ConfigError(f"missing required key {key}")
    if isinstance(v, str):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    if kind is int:
        if v != int(v):
            raise ConfigError(f"{key} must be an integer, got {v}")
        return int(v)
    return float(v)


def build_config(raw: dict) -> ScenarioConfig:
    """Validate a parsed key-value dict into a ScenarioConfig."""
    raw = dict(raw)
    scenario = raw.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {', '.join(SCENARIOS)}; got {scenario!r}")
    known = {"scenario", "output.dir", "simulation.dt", "game.sigma_X", "sweep.axis", "sweep.values"}
    known |= set(DEFAULTS) | {f"payoff.{f}" for f in PAYOFF_FIELDS} | {"payoff.psi0", "payoff.psi1", "payoff.psi2"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    if "game.sigma_X" not in raw:
        if scenario not in DEFAULT_SIGMA_X:
            raise ConfigError(f"scenario {scenario} needs game.sigma_X")
        raw["game.sigma_X"] = DEFAULT_SIGMA_X[scenario]
    sx = _num(raw, "game.sigma_X")
    if scenario == "leadership_public" and sx != 0.0:
        raise ConfigError("leadership_public needs game.sigma_X = 0")
    if scenario == "leadership_nofeedback" and not math.isinf(sx):
        raise ConfigError("leadership_nofeedback needs game.sigma_X = inf")
    if scenario == "leadership_interior" and not (0.0 < sx < math.inf):
        raise ConfigError("leadership_interior needs a finite positive game.sigma_X")
    try:
        params = GameParams(sigma_X=sx, sigma_Y=_num(raw, "game.sigma_Y"), gamma0=_num(raw, "game.gamma0"),
                            r=_num(raw, "game.r"), T=_num(raw, "game.T"), mu=_num(raw, "game.mu"))
    except (ValueError, ArtifactError) as exc:
        raise ConfigError(str(exc)) from exc

    lam = psi = None
    term = NO_TERMINAL_PAYOFF
    if scenario.startswith("leadership_"):
        spec = leadership_spec()
    elif scenario == "common_value_lambda":
        lam = _num(raw, "payoff.lambda")
        if not 0.0 <= lam <= 1.0:
            raise ConfigError(f"payoff.lambda must lie in [0, 1], got {lam}")
        spec = common_value_spec(lam)
    elif scenario == "conflict_of_interest":
        spec = conflict_spec(_num(raw, "payoff.bias"))
    elif scenario == "reputation":
        psi = _num(raw, "payoff.psi")
        if not math.isfinite(psi):
            raise ConfigError("payoff.psi must be finite")
        spec = reputation_spec()
        term = TerminalPayoffSpec(psi2=-psi)
    else:
        missing = [f for f in PAYOFF_FIELDS[:5] if f"payoff.{f}" not in raw]
        if missing:
            raise ConfigError(f"custom_payoffs needs {', '.join('payoff.' + m for m in missing)}")
        spec = PayoffSpec(**{f: _num(raw, f"payoff.{f}") for f in PAYOFF_FIELDS if f"payoff.{f}" in raw})
        term = TerminalPayoffSpec(*(float(raw.get(f"payoff.psi{j}", 0.0)) for j in range(3)))
    dt = raw.get("simulation.dt")
    if dt is not None and (isinstance(dt, str) or dt <= 0):
        raise ConfigError("simulation.dt must be a positive number")
    out_dir = raw.get("output.dir", "out")
    return ScenarioConfig(
        scenario=scenario, params=params, spec=spec, term=term, lam=lam, psi=psi,
        tol=_num(raw, "solver.tol"), fp_tol=_num(raw, "solver.fp_tol"),
        steps_per_unit=_num(raw, "solver.steps_per_unit", int), max_iter=_num(raw, "solver.max_iter", int),
        n_paths=_num(raw, "simulation.n_paths", int), dt=dt, seed=_num(raw, "simulation.seed", int),
        n_records=_num(raw, "simulation.n_records", int), out_dir=str(out_dir), raw=raw,
    )


def load_raw(path: str | None, preset: str | None) -> dict:
    raw = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(sorted(PRESETS))}")
        raw.update(PRESETS[preset])
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        raw.update(parse_config_text(text))
    if not raw:
        raise ConfigError("give --config or --preset")
    return raw


# ---------------------------------------------------------------- solving

def solve_config(cfg: ScenarioConfig):
    """Pick the solver that fits the payoff family and the monitoring regime."""
    from .solver_fixedpoint import solve_fixed_point
    from .solver_shooting import solve_limit, solve_private_interior

    p, spec, term = cfg.params, cfg.spec, cfg.term
    if p.regime != "interior":
        return solve_limit(spec, p, term, tol=cfg.tol, steps_per_unit=cfg.steps_per_unit)
    if spec.uhat_hatatheta == 0.0 and term.is_zero and cfg.scenario != "common_value_lambda":
        return solve_private_interior(spec, p, tol=cfg.tol, steps_per_unit=cfg.steps_per_unit)
    return solve_fixed_point(spec, p, term, tol=cfg.fp_tol, max_iter=cfg.max_iter,
                             steps_per_unit=cfg.steps_per_unit)


def scenario_notes(cfg: ScenarioConfig) -> list:
    notes = []
    report = validate_assumptions(cfg.spec)
    failures = [f for f in report.failures if not (f == "iii-long-run" and not cfg.term.is_zero)]
    notes.extend(f"assumption check failed: {f}" for f in failures)
    if cfg.scenario == "reputation" and cfg.psi is not None:
        bound = cfg.params.sigma_Y**2 / cfg.params.gamma0
        if cfg.psi >= bound:
            notes.append(f"uniqueness not guaranteed: psi = {cfg.psi:g} >= sigma_Y^2/gamma0 = {bound:g}")
    if cfg.params.regime == "interior" and cfg.spec.uhat_hatatheta != 0.0:
        notes.append("existence is guaranteed only for horizons below a bound of order 1/gamma0")
    return notes


def coefficient_rows(sol) -> np.ndarray:
    c = sol.coefficients
    return np.column_stack([c.t, c.beta, c.alpha, c.delta, c.gamma, c.chi, sol.value.v])


def _fmt(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.10e}"


def provenance(cfg: ScenarioConfig) -> list:
    p = cfg.params
    return [
        f"# scenario={cfg.scenario} config_hash={cfg.hash}",
        f"# tol={cfg.tol:g} fp_tol={cfg.fp_tol:g} steps_per_unit={cfg.steps_per_unit} max_iter={cfg.max_iter}",
        f"# sigma_X={p.sigma_X_value:g} sigma_Y={p.sigma_Y:g} gamma0={p.gamma0:g} r={p.r:g} T={p.T:g} mu={p.mu:g}",
    ]


def render_csv(header_lines: list, columns: list, rows) -> str:
    lines = list(header_lines) + [",".join(columns)]
    lines += [",".join(_fmt(float(x)) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x if x is None or isinstance(x, str) else repr(x)


def diagnostics_dict(cfg, sol=None, status="accepted", code=EXIT_OK, error=None, simulation=None) -> dict:
    d = dict.fromkeys(DIAGNOSTIC_KEYS)
    d.update(scenario=cfg.scenario, status=status, exit_code=code, config_hash=cfg.hash,
             notes=scenario_notes(cfg), error=error, simulation=simulation, accepted=False)
    if sol is not None:
        diag = sol.diagnostics
        d.update(accepted=sol.accepted, foc_max_residual=diag.foc_max_residual,
                 boundary_residuals=diag.boundary_residuals, invariant_flags=diag.invariant_flags,
                 telemetry=diag.telemetry)
    return _jsonable(d)


def simulation_summary(cfg: ScenarioConfig, sol):
    from .simulate import filter_bias, payoff_estimate, second_moment_check, simulate_paths

    ens = simulate_paths(sol, cfg.params, cfg.n_paths, cfg.dt, cfg.seed, n_records=cfg.n_records)
    mc = second_moment_check(ens)
    bias = filter_bias(ens)
    s = ens.series
    rows = np.column_stack([
        ens.record_t, ens.gamma_rec, ens.chi_rec, s["a"].mean(1), s["ahat"].mean(1), s["Mhat"].mean(1),
        s["M"].mean(1), s["L"].mean(1), mc.sample_var, mc.model_var, mc.z,
        (ens.theta[None, :] - s["Mhat"]).mean(1),
    ])
    pe = payoff_estimate(ens)
    summary = {
        "n_paths": ens.n_paths, "dt": ens.dt, "seed": ens.seed, "payoff_mean": pe.mean, "payoff_se": pe.se,
        "coordination_mean": pe.coordination_mean, "coordination_se": pe.coordination_se,
        "adaptation_mean": pe.adaptation_mean, "adaptation_se": pe.adaptation_se,
        "representation_max": ens.representation_max, "second_moment_pass": mc.passes,
        "max_abs_filter_bias_z": float(np.max(np.abs(bias))),
    }
    return rows, summary


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path, simulate: bool = False, figures: bool = False):
    """Solve one scenario and write its files. Returns (exit code, diagnostics, coefficient rows or None)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sol = None
    sim_summary = None
    try:
        sol = solve_config(cfg)
    except (AlphaVanishes, ArtifactError) as exc:
        diag = diagnostics_dict(cfg, None, "no_solution", EXIT_SOLVER, f"{type(exc).__name__}: {exc}")
        _write_json(out / "diagnostics.json", diag)
        return EXIT_SOLVER, diag, None
    rows = coefficient_rows(sol)
    (out / "coefficients.csv").write_text(render_csv(provenance(cfg), CSV_COLUMNS, rows), encoding="utf-8")
    if simulate:
        sim_rows, sim_summary = simulation_summary(cfg, sol)
        head = provenance(cfg) + [f"# n_paths={cfg.n_paths} seed={cfg.seed} dt={sim_summary['dt']:g}"]
        (out / "simulation.csv").write_text(render_csv(head, SIM_COLUMNS, sim_rows), encoding="utf-8")
    code = EXIT_OK if sol.accepted else EXIT_VERIFY
    diag = diagnostics_dict(cfg, sol, "accepted" if sol.accepted else "verification_failed", code,
                            simulation=sim_summary)
    _write_json(out / "diagnostics.json", diag)
    if figures:
        from .plotting import plot_solution

        plot_solution(sol, out / "coefficients.png", title=cfg.scenario)
    return code, diag, rows


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- sweeps

def _axis_values(text) -> list:
    if isinstance(text, float):
        return [text]
    vals = [parse_value(v) for v in str(text).split(",") if v.strip()]
    if not vals or any(isinstance(v, str) for v in vals):
        raise ConfigError(f"sweep values must be numbers: {text!r}")
    return vals


_AXIS_KEY = {"sigma_X": "game.sigma_X", "r": "game.r", "lambda": "payoff.lambda", "psi": "payoff.psi",
             "gamma0": "game.gamma0", "T": "game.T"}


def sweep_cells(raw: dict, axis: str, values: list) -> list:
    """One raw config per axis value; leadership scenarios follow the σ_X regime."""
    if axis not in SWEEPABLE:
        raise ConfigError(f"axis must be one of {', '.join(SWEEPABLE)}; got {axis!r}")
    cells = []
    for v in values:
        cell = {k: x for k, x in raw.items() if not k.startswith("sweep.")}
        cell[_AXIS_KEY[axis]] = v
        if axis == "sigma_X" and str(cell.get("scenario", "")).startswith("leadership_"):
            cell["scenario"] = ("leadership_public" if v == 0 else
                                "leadership_nofeedback" if math.isinf(v) else "leadership_interior")
        build_config(cell)
        cells.append(cell)
    return cells


def _run_cell(args):
    raw, out_dir, figures = args
    return run_scenario(build_config(raw), out_dir, figures=figures)


def run_sweep(raw: dict, axis: str, values: list, out_dir: str | Path, workers: int = 1, figures: bool = False):
    """Run every cell (in parallel when workers > 1) and write sweep.csv plus sweep_summary.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = sweep_cells(raw, axis, values)
    jobs = [(cell, str(out / f"cell_{i:02d}"), figures) for i, cell in enumerate(cells)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    head = [f"# sweep axis={axis} values={','.join(_fmt(float(v)) for v in values)} config_hash={config_hash(raw)}"]
    table, summary = [], []
    for v, (code, diag, rows) in zip(values, results):
        summary.append(f"{_fmt(float(v))},{diag['status']},{code}")
        if rows is not None:
            table.extend(np.column_stack([np.full(len(rows), float(v)), rows]))
    (out / "sweep.csv").write_text(render_csv(head, [axis] + CSV_COLUMNS, table), encoding="utf-8")
    (out / "sweep_summary.csv").write_text("\n".join(head + ["value,status,exit_code"] + summary) + "\n",
                                           encoding="utf-8")
    if figures:
        from .plotting import plot_sweep

        plot_sweep(axis, values, [r[2] for r in results], out / "sweep_alpha3.png")
    codes = [c for c, _, _ in results]
    return max(codes) if codes else EXIT_OK, results


# ---------------------------------------------------------------- check

def check_scenario(cfg: ScenarioConfig, out_dir, golden: str | None = None):
    """Diagnostics-only run; optionally compare coefficients.csv with a golden file byte for byte."""
    code, diag, _ = run_scenario(cfg, out_dir)
    result = dict(diag.get("invariant_flags") or {})
    if golden is not None:
        produced = Path(out_dir) / "coefficients.csv"
        try:
            same = produced.exists() and produced.read_bytes() == Path(golden).read_bytes()
        except OSError:
            same = False
        result["golden_match"] = same
        if not same and code == EXIT_OK:
            code = EXIT_VERIFY
    return code, result


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="artifact", description="Solve, sweep and simulate linear Markov equilibria.")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in ("solve", "sweep", "simulate", "check"):
        sp = sub.add_parser(verb)
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--preset", help=f"named config ({', '.join(sorted(PRESETS))})")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--workers", type=int, default=1, help="parallel sweep cells")
        sp.add_argument("--seed", type=int, help="simulation seed (overrides simulation.seed)")
        sp.add_argument("--figures", action="store_true", help="also render PNG figures next to the CSV files")
        if verb == "sweep":
            sp.add_argument("--axis", help="parameter to sweep")
            sp.add_argument("--values", help="comma-separated values, inf allowed")
        if verb == "check":
            sp.add_argument("--golden", help="expected coefficients.csv for a byte-for-byte comparison")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = load_raw(args.config, args.preset)
        if args.seed is not None:
            raw["simulation.seed"] = float(args.seed)
        if args.out is not None:
            raw["output.dir"] = args.out
        out_dir = str(raw.get("output.dir", "out"))
        if args.verb == "sweep":
            axis = args.axis or raw.get("sweep.axis")
            values = args.values or raw.get("sweep.values")
            if axis is None or values is None:
                raise ConfigError("sweep needs --axis and --values (or sweep.axis / sweep.values)")
            code, results = run_sweep(raw, str(axis), _axis_values(values), out_dir, max(1, args.workers),
                                      args.figures)
            for (c, d, _) in results:
                print(f"{d['scenario']}: {d['status']} (exit {c})")
            return code
        raw.pop("sweep.axis", None)
        raw.pop("sweep.values", None)
        cfg = build_config(raw)
        if args.verb == "check":
            code, result = check_scenario(cfg, out_dir, args.golden)
            print(json.dumps(_jsonable(result), sort_keys=True))
            return code
        code, diag, _ = run_scenario(cfg, out_dir, simulate=args.verb == "simulate", figures=args.figures)
        print(f"{cfg.scenario}: {diag['status']} (exit {code}) -> {out_dir}")
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
