import json
from fractions import Fraction as F

import pytest

from caliblab.cli import dispatch
from caliblab import Step, Transcript, make_grid, write_transcript_csv


def run(capsys, *argv):
    code = dispatch(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_bounds_table(capsys):
    code, out, _ = run(capsys, "bounds", "--grid", "10", "--horizon", "1000")
    assert code == 0
    assert "main" in out and "threshold T>=1000" in out
    assert "0.1" in out


def test_bounds_outputs(tmp_path, capsys):
    csv_path = tmp_path / "b.csv"
    json_path = tmp_path / "b.json"
    code, _, _ = run(
        capsys, "bounds", "--grid", "2", "--horizon", "8",
        "--csv", str(csv_path), "--json", str(json_path),
    )
    assert code == 0
    assert "main,0.5,8" in csv_path.read_text().replace(" ", "")
    data = json.loads(json_path.read_text())
    assert data["bounds"]["main"]["threshold"] == 8
    assert data["bounds"]["refined"]["threshold"] == 8


def test_solve_exact_single_point(capsys):
    code, out, err = run(capsys, "solve", "--grid", "1", "--horizon", "8", "--exact")
    assert code == 0
    assert "value: 1/2 (0.5)" in out
    assert "value <= main bound: True" in out
    assert "state space" in err


def test_solve_certify(capsys):
    code, out, _ = run(
        capsys, "solve", "--grid", "2", "--horizon", "4", "--exact", "--certify"
    )
    assert code == 0
    assert "rainmaker best-response gain: 0" in out
    assert "forecaster best-response gain: 0" in out


def test_solve_resource_error_exit_code(capsys):
    code, _, err = run(capsys, "solve", "--grid", "10", "--horizon", "500")
    assert code == 2
    assert "error:" in err


def test_score_command(tmp_path, capsys):
    grid = make_grid(2)
    t = Transcript(steps=(Step(1, F(1, 4), prob=F(3, 10)), Step(0, F(3, 4))))
    path = tmp_path / "t.csv"
    write_transcript_csv(t, path)
    code, out, _ = run(capsys, "score", "--transcript", str(path), "--grid", "2")
    assert code == 0
    data = json.loads(out)
    assert data["horizon"] == 2
    assert data["k_score"]["rational"] == "3/4"


def test_score_off_grid_names_the_row(tmp_path, capsys):
    path = tmp_path / "t.csv"
    path.write_text("t,a,c,p\n1,1,1/4,\n2,0,1/3,\n")
    code, _, err = run(capsys, "score", "--transcript", str(path), "--grid", "2")
    assert code == 1
    assert "period 2" in err


def test_score_missing_file(capsys):
    code, _, err = run(capsys, "score", "--transcript", "/nonexistent.csv", "--grid", "2")
    assert code == 1
    assert "error:" in err


def test_simulate_deterministic_output(capsys):
    argv = [
        "simulate", "--grid", "2", "--horizon", "12",
        "--rainmaker", "revealed-uniform", "--forecaster", "best-response",
        "--reps", "20", "--seed", "5",
    ]
    code1, out1, _ = run(capsys, *argv)
    code2, out2, _ = run(capsys, *argv)
    assert code1 == code2 == 0
    assert out1 == out2
    data = json.loads(out1)
    assert data["replications"] == 20
    assert data["mean_k_tilde"] is not None


def test_simulate_exhaustive(capsys):
    code, out, _ = run(
        capsys, "simulate", "--grid", "1", "--horizon", "2",
        "--rainmaker", "iid:1/2", "--forecaster", "constant:1/2",
        "--reps", "1", "--seed", "0", "--mode", "exhaustive",
    )
    assert code == 0
    data = json.loads(out)
    assert data["exact"]["mean_k"] == "1/4"


def test_simulate_incompatible_specs(capsys):
    code, _, err = run(
        capsys, "simulate", "--grid", "2", "--horizon", "4",
        "--rainmaker", "counter-forecast", "--forecaster", "best-response",
        "--reps", "2", "--seed", "1", "--order", "forecast-first",
    )
    assert code == 1
    assert "error:" in err


def test_solved_strategy_feeds_simulate(tmp_path, capsys):
    out_path = tmp_path / "strategy.json"
    code, _, _ = run(
        capsys, "solve", "--grid", "2", "--horizon", "3", "--exact",
        "--strategy-out", str(out_path),
    )
    assert code == 0
    code, out, _ = run(
        capsys, "simulate", "--grid", "2", "--horizon", "3",
        "--rainmaker", "iid:0.5", "--forecaster", f"markov:{out_path}",
        "--reps", "10", "--seed", "3",
    )
    assert code == 0
    assert json.loads(out)["mean_k"] >= 0


def test_sweep_command(tmp_path, capsys):
    csv_path = tmp_path / "sweep.csv"
    code, out, _ = run(
        capsys, "sweep", "--grid", "2", "--horizons", "8,16,32",
        "--rainmaker", "revealed-uniform", "--forecaster", "best-response",
        "--reps", "40", "--seed", "2", "--csv", str(csv_path),
    )
    assert code == 0
    assert "slope[N=2" in out
    assert csv_path.exists()


def test_sweep_rejects_empty_horizons(capsys):
    code, _, err = run(
        capsys, "sweep", "--grid", "2", "--horizons", ",",
        "--rainmaker", "iid:0.5", "--forecaster", "best-response",
        "--reps", "5", "--seed", "1",
    )
    assert code == 1
    assert "error:" in err


def test_usage_errors_exit_one(capsys):
    code, _, err = run(capsys, "bogus")
    assert code == 1
    code, _, err = run(capsys, "solve", "--grid", "1", "--horizon", "2", "--nope")
    assert code == 1
    code, _, _ = run(capsys)
    assert code == 1


@pytest.mark.parametrize(
    "cmd", [[], ["score"], ["simulate"], ["solve"], ["bounds"], ["sweep"]]
)
def test_help_exits_zero(capsys, cmd):
    code, out, _ = run(capsys, *cmd, "--help")
    assert code == 0
    assert "usage" in out.lower()
