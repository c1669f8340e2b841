import csv
import json

import pytest

from memsudoku.cli import main
from memsudoku.config import ALL_KEYS, ConfigError, RunConfig
from memsudoku.engine import StopMode

A_TEXT = "1 . .\n. 3 .\n. . .\n"
EMPTY3 = ". . .\n. . .\n. . .\n"


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text if isinstance(text, str) else json.dumps(text))
        return str(path)

    return write


def test_config_keys_exact():
    assert set(ALL_KEYS) == {
        "v_dd", "r", "c", "c_c", "lrs", "hrs", "p_set", "t_amb", "t_crit", "r_th", "c_th", "t_lock",
        "dt", "t_end", "event_tol", "sample_every", "stop_mode", "stable_cycles", "seed", "jitter",
        "clue_base", "clue_step", "boxes",
    }


def test_config_roundtrip_and_defaults():
    rc = RunConfig()
    assert rc.sim.stop_mode == StopMode.STABLE_READOUT
    assert RunConfig.from_dict(rc.to_dict()) == rc
    assert RunConfig.from_dict({"c_c": 5e-10}).circuit.c_c == 5e-10


@pytest.mark.parametrize(
    "data",
    [{"bogus": 1}, {"r": 2e6}, {"sample_every": 0}, {"sample_every": 1.5}, {"dt": -1}, {"boxes": "maybe"}, {"clue_step": -0.1}, {"stop_mode": "NEVER"}],
)
def test_config_errors(data):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data)


def test_solve_instance_a(files, tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["solve", "--puzzle", files("a.txt", A_TEXT), "--boxes", "off", "--out", str(out)])
    assert code == 0
    sol = json.loads((out / "solution.json").read_text())
    assert sol["solved"] and sol["grid"] == [[1, 2, 3], [2, 3, 1], [3, 1, 2]] and sol["diagnostic"] is None
    assert set(sol) == {"solved", "grid", "cluster_times_s", "diagnostic", "cycles_simulated"}
    assert (out / "events.csv").read_text().startswith("t,cell,kind\n")
    assert "solved" in capsys.readouterr().out


def test_solve_grid_passes_oracle(files, tmp_path, capsys):
    out = tmp_path / "run"
    main(["solve", "--puzzle", files("a.txt", A_TEXT), "--boxes", "off", "--out", str(out)])
    grid = json.loads((out / "solution.json").read_text())["grid"]
    capsys.readouterr()
    solved = "\n".join(" ".join(map(str, row)) for row in grid) + "\n"
    assert main(["oracle", "--puzzle", files("s.txt", solved)]) == 0
    assert "count: 1" in capsys.readouterr().out


def test_solve_malformed_puzzle(files, tmp_path):
    assert main(["solve", "--puzzle", files("bad.txt", "1 2\n3\n"), "--out", str(tmp_path)]) == 2


def test_solve_missing_puzzle(tmp_path):
    assert main(["solve", "--puzzle", str(tmp_path / "nope.txt"), "--out", str(tmp_path)]) == 2


def test_solve_short_horizon(files, tmp_path):
    cfg = files("short.json", {"t_end": 1e-5})
    out = tmp_path / "run"
    assert main(["solve", "--puzzle", files("a.txt", A_TEXT), "--config", cfg, "--boxes", "off", "--out", str(out)]) == 1
    sol = json.loads((out / "solution.json").read_text())
    assert sol["diagnostic"] in ("not-oscillating", "incomplete-cycle") and not sol["solved"]


def test_simulate_single_cell(files, tmp_path):
    cfg = files("c.json", {"t_end": 1e-4})
    out = tmp_path / "v.csv"
    assert main(["simulate", "--puzzle", files("one.txt", ".\n"), "--config", cfg, "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "t,v_out_0"


def test_simulate_row_count(files, tmp_path, capsys):
    cfg = files("c.json", {"t_end": 1e-3, "sample_every": 7})
    out = tmp_path / "v.csv"
    assert main(["simulate", "--puzzle", files("a.txt", A_TEXT), "--config", cfg, "--boxes", "off", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    steps = int(capsys.readouterr().out.split()[0])
    assert rows[0].split(",") == ["t"] + [f"v_out_{i}" for i in range(9)]
    assert len(rows) - 1 == steps // 7 + 1


def test_simulate_sample_every_zero(files, tmp_path):
    assert main(["simulate", "--puzzle", files("a.txt", A_TEXT), "--sample-every", "0", "--out", str(tmp_path / "v.csv")]) == 2
    cfg = files("c.json", {"sample_every": 0})
    assert main(["simulate", "--puzzle", files("a.txt", A_TEXT), "--config", cfg, "--out", str(tmp_path / "v.csv")]) == 2


@pytest.mark.parametrize(
    "text, code, count",
    [(EMPTY3, 0, "count: 12"), (A_TEXT, 0, "count: 1"), ("1 1\n. .\n", 1, "count: 0")],
)
def test_oracle(files, capsys, text, code, count):
    assert main(["oracle", "--puzzle", files("p.txt", text), "--boxes", "off", "--limit", "100"]) == code
    assert capsys.readouterr().out.splitlines()[0] == count


def test_oracle_prints_unique_completion(files, capsys):
    main(["oracle", "--puzzle", files("p.txt", A_TEXT), "--boxes", "off"])
    assert capsys.readouterr().out.splitlines()[1:] == ["1 2 3", "2 3 1", "3 1 2"]


def test_check_params(files, capsys):
    assert main(["check-params"]) == 0
    assert main(["check-params", "--config", files("r.json", {"r": 2e6})]) == 1
    assert "R≪HRS" in capsys.readouterr().out
    assert main(["check-params", "--config", "/nonexistent/x.json"]) == 2
    assert main(["check-params", "--config", files("bad.json", "{not json")]) == 2


def test_sweep_row_count(files, tmp_path):
    out = tmp_path / "sweep.csv"
    args = ["sweep", "--puzzle", files("a.txt", A_TEXT), "--boxes", "off", "--param", "clue_step",
            "--from", "0.05", "--to", "0.25", "--steps", "5", "--seeds", "3", "--out", str(out)]
    assert main(args) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 15
    assert [(float(r["value"]), int(r["seed"])) for r in rows] == sorted((float(r["value"]), int(r["seed"])) for r in rows)


def test_sweep_parallel_matches_serial(files, tmp_path):
    base = ["sweep", "--puzzle", files("a.txt", A_TEXT), "--boxes", "off", "--param", "seed-range",
            "--from", "0", "--to", "2", "--steps", "3"]
    assert main(base + ["--out", str(tmp_path / "s1.csv")]) == 0
    assert main(base + ["--out", str(tmp_path / "s2.csv"), "--jobs", "2"]) == 0
    assert (tmp_path / "s1.csv").read_bytes() == (tmp_path / "s2.csv").read_bytes()


def test_sweep_controls(files, tmp_path):
    out = tmp_path / "cc.csv"
    main(["sweep", "--puzzle", files("a.txt", A_TEXT), "--boxes", "off", "--param", "c_c",
          "--from", "0", "--to", "1e-9", "--steps", "2", "--out", str(out)])
    rows = list(csv.DictReader(out.open()))
    assert rows[0]["solved"] == "false" and rows[1]["solved"] == "true"
    out = tmp_path / "j.csv"
    main(["sweep", "--puzzle", files("e.txt", EMPTY3), "--boxes", "off", "--param", "jitter",
          "--from", "0", "--to", "0", "--steps", "1", "--out", str(out)])
    assert list(csv.DictReader(out.open()))[0]["solved"] == "false"


def test_sweep_unknown_param(files, tmp_path):
    assert main(["sweep", "--puzzle", files("a.txt", A_TEXT), "--param", "r", "--from", "0", "--to", "1",
                 "--out", str(tmp_path / "x.csv")]) == 2


def test_usage_error_exit_code():
    assert main(["frobnicate"]) == 2
    assert main(["solve"]) == 2
