import csv
import json
import math
from pathlib import Path

import pytest

from artifact.cli import (
    CSV_COLUMNS, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_VERIFY, PRESETS, SIM_COLUMNS, build_config,
    check_scenario, config_hash, load_raw, main, parse_config_text, sweep_cells,
)
from artifact.errors import ConfigError

GOLDEN = Path(__file__).parent / "golden"


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_table(path):
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.reader(lines))


def test_parse_config_text():
    raw = parse_config_text("# comment\nscenario = reputation\ngame.T = 1e-1\ngame.sigma_X = inf\n")
    assert raw == {"scenario": "reputation", "game.T": 0.1, "game.sigma_X": math.inf}


def test_config_hash_ignores_order_and_output():
    a = parse_config_text("scenario = leadership_public\ngame.T = 2\n")
    b = parse_config_text("game.T = 2\nscenario = leadership_public\noutput.dir = elsewhere\n")
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash({**a, "game.T": 3.0})


@pytest.mark.parametrize("text", [
    "scenario = nonsense\n",
    "scenario = leadership_public\ngame.T = -1\n",
    "scenario = leadership_public\ngame.sigma_Y = abc\n",
    "scenario = leadership_public\nthis line has no equals sign\n",
    "scenario = leadership_interior\ngame.sigma_X = 0\n",
])
def test_bad_configs_exit_one(tmp_path, text):
    assert main(["solve", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_missing_config_file_exits_one(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "absent.cfg")]) == EXIT_CONFIG


def test_unknown_preset_is_a_config_error():
    with pytest.raises(ConfigError):
        load_raw(None, "no_such_preset")


def test_every_preset_builds():
    for name in PRESETS:
        raw = load_raw(None, name)
        raw.pop("sweep.axis", None)
        raw.pop("sweep.values", None)
        build_config(raw)


def test_solve_writes_coefficients_and_diagnostics(tmp_path):
    out = tmp_path / "o"
    assert main(["solve", "--config", str(GOLDEN / "public.cfg"), "--out", str(out)]) == EXIT_OK
    table = read_table(out / "coefficients.csv")
    assert table[0] == CSV_COLUMNS
    assert len(table) == 1 + 101
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["status"] == "accepted" and diag["exit_code"] == 0
    assert diag["foc_max_residual"] < 1e-6


@pytest.mark.parametrize("name", ["nofeedback", "public"])
def test_check_matches_golden(tmp_path, name):
    cfg = build_config(load_raw(str(GOLDEN / f"{name}.cfg"), None))
    code, result = check_scenario(cfg, tmp_path / "o", str(GOLDEN / f"{name}.csv"))
    assert code == EXIT_OK and result["golden_match"]


def test_check_against_corrupted_golden_exits_three(tmp_path):
    bad = tmp_path / "bad.csv"
    text = (GOLDEN / "public.csv").read_text()
    bad.write_text(text.replace("5.5488611432e-01", "5.5488611433e-01", 1))
    code = main(["check", "--config", str(GOLDEN / "public.cfg"), "--out", str(tmp_path / "o"),
                 "--golden", str(bad)])
    assert code == EXIT_VERIFY


def test_long_common_value_horizon_exits_two(tmp_path):
    cfg = write_cfg(tmp_path, "scenario = common_value_lambda\ngame.sigma_X = 1\ngame.T = 20\n"
                              "payoff.lambda = 0.5\nsolver.steps_per_unit = 50\nsolver.max_iter = 30\n")
    out = tmp_path / "o"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == EXIT_SOLVER
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["status"] == "no_solution" and diag["error"]
    assert not (out / "coefficients.csv").exists()


def test_reputation_flags_possible_multiplicity(tmp_path):
    cfg = write_cfg(tmp_path, "scenario = reputation\npayoff.psi = 3\ngame.T = 1\nsolver.steps_per_unit = 100\n")
    out = tmp_path / "o"
    main(["solve", "--config", cfg, "--out", str(out)])
    diag = json.loads((out / "diagnostics.json").read_text())
    assert any("uniqueness not guaranteed" in n for n in diag["notes"])


def test_simulate_writes_moment_table(tmp_path):
    out = tmp_path / "o"
    cfg = write_cfg(tmp_path, "scenario = leadership_interior\ngame.sigma_X = 1\ngame.T = 1\n"
                              "solver.steps_per_unit = 100\nsimulation.n_paths = 200\nsimulation.n_records = 5\n")
    assert main(["simulate", "--config", cfg, "--out", str(out), "--seed", "3"]) == EXIT_OK
    table = read_table(out / "simulation.csv")
    assert table[0] == SIM_COLUMNS and len(table) == 6
    first = (out / "simulation.csv").read_bytes()
    main(["simulate", "--config", cfg, "--out", str(out), "--seed", "3"])
    assert (out / "simulation.csv").read_bytes() == first


def test_sweep_cells_follow_monitoring_regime():
    raw = {"scenario": "leadership_interior", "game.sigma_X": 1.0}
    cells = sweep_cells(raw, "sigma_X", [0.0, 1.0, math.inf])
    assert [c["scenario"] for c in cells] == ["leadership_public", "leadership_interior", "leadership_nofeedback"]
    with pytest.raises(ConfigError):
        sweep_cells(raw, "sigma_Y", [1.0])


def test_sweep_writes_tables_and_figures(tmp_path):
    cfg = write_cfg(tmp_path, "scenario = leadership_interior\ngame.sigma_X = 1\ngame.T = 0.5\n"
                              "solver.steps_per_unit = 100\n")
    out = tmp_path / "o"
    code = main(["sweep", "--config", cfg, "--axis", "sigma_X", "--values", "0,1,inf", "--out", str(out),
                 "--figures"])
    assert code == EXIT_OK
    table = read_table(out / "sweep.csv")
    assert table[0] == ["sigma_X"] + CSV_COLUMNS and len(table) == 1 + 3 * 51
    summary = (out / "sweep_summary.csv").read_text().splitlines()
    cells = [ln.split(",") for ln in summary[-3:]]
    assert [float(v) for v, _, _ in cells] == [0.0, 1.0, math.inf]
    assert all(status == "accepted" and code == "0" for _, status, code in cells)
    assert (out / "sweep_alpha3.png").stat().st_size > 0
    assert (out / "cell_01" / "coefficients.png").stat().st_size > 0


def test_sweep_without_axis_is_a_config_error(tmp_path):
    cfg = write_cfg(tmp_path, "scenario = leadership_public\n")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
