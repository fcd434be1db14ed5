import csv
import io
import json
import os
import subprocess
import sys

import pytest

from levy_barrier import cli, equilibrium
from levy_barrier.levy import SolverError


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_barriers_json(capsys):
    code, out, _ = run(["barriers"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["b_star"] < doc["b_e"]
    assert doc["b_e"] == pytest.approx(4.2177, abs=1e-3)
    assert doc["config"]["lambda"] == 1.0 and doc["config"]["mu"] == -1.0
    assert "threads" not in doc["config"]


def test_result_round_trips_through_config(tmp_path, capsys):
    first = tmp_path / "first.json"
    assert cli.main(["barriers", "--model", "jd", "--beta", "0.7", "--out", str(first)]) == 0
    second = tmp_path / "second.json"
    assert cli.main(["barriers", "--config", str(first), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "jd", "phi": 1.5}))
    code, out, _ = run(["barriers", "--config", str(cfg), "--phi", "1.3"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["phi"] == 1.3 and doc["config"]["model"] == "jd"
    assert doc["config"]["p"] == 0.5


@pytest.mark.parametrize("argv", [
    ["barriers", "--beta", "1.5"],
    ["barriers", "--phi", "0.9"],
    ["barriers", "--model", "bm", "--p", "1"],
    ["sweep", "--parameter", "beta", "--grid", ""],
    ["sweep", "--parameter", "beta", "--grid", "0.9,0.1"],
    ["sweep", "--parameter", "beta", "--grid", "0.1:0.9:3", "--metrics", "nope"],
    ["value", "--barrier", "tall"],
    ["value", "--phi", "1.0"],
    ["barriers", "--format", "csv"],
    ["barriers", "--threads", "0"],
])
def test_configuration_errors_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert err


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "bm", "gamma": 1}))
    assert run(["barriers", "--config", str(cfg)], capsys)[0] == 2


def test_missing_config_file_exits_2(tmp_path, capsys):
    assert run(["barriers", "--config", str(tmp_path / "none.json")], capsys)[0] == 2


def test_usage_error_exits_2(capsys):
    assert run(["frobnicate"], capsys)[0] == 2


def test_solver_failure_exits_3(monkeypatch, capsys):
    def boom(problem, **kw):
        raise SolverError("no sign change")
    monkeypatch.setattr(equilibrium, "b_star", boom)
    code, _, err = run(["barriers"], capsys)
    assert code == 3 and "solver failure" in err


def test_value_csv(capsys):
    code, out, _ = run(["value", "--x-grid", "0:4:5"], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["x", "exponential", "quasi_hyperbolic", "loss"]
    assert [float(r[0]) for r in rows[1:]] == [0.0, 1.0, 2.0, 3.0, 4.0]
    assert all(float(r[3]) >= 0 for r in rows[1:])


def test_value_json_and_svg(tmp_path, capsys):
    code, out, _ = run(["value", "--format", "json", "--barrier", "b_e", "--x-grid", "1,2"],
                       capsys)
    doc = json.loads(out)
    assert code == 0 and doc["barrier"] == doc["b_e"] and doc["x"] == [1.0, 2.0]
    target = tmp_path / "v.svg"
    assert cli.main(["value", "--format", "svg", "--out", str(target)]) == 0
    assert target.read_text().startswith("<svg")


def test_loss_outputs(capsys):
    code, out, _ = run(["loss", "--x0", "1"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["x"] == [1.0] and doc["loss"][0] > 0
    code, out, _ = run(["loss", "--beta", "1", "--format", "csv", "--x-grid", "0,1"], capsys)
    assert code == 0 and out.splitlines()[1:] == ["0.0,0.0", "1.0,0.0"]


def test_bailout(capsys):
    code, out, _ = run(["bailout", "--model", "jd", "--phi", "2"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["inject_optimal"] is False
    assert doc["route_a"] == pytest.approx(doc["route_b"], abs=1e-9)


def test_sweep_formats(tmp_path, capsys):
    code, out, _ = run(["sweep", "--parameter", "lambda", "--grid", "0:2:3"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 3
    assert float(rows[0]["b_star"]) == pytest.approx(float(rows[0]["b_e"]), abs=1e-9)
    code, out, _ = run(["sweep", "--parameter", "beta", "--grid", "0.5,1", "--format", "json"],
                       capsys)
    assert code == 0 and len(json.loads(out)["rows"]) == 2
    target = tmp_path / "s.svg"
    assert cli.main(["sweep", "--parameter", "phi", "--grid", "1.1:1.5:3", "--format", "svg",
                     "--metrics", "b_star,b_e", "--out", str(target)]) == 0
    assert (tmp_path / "s.csv").exists()
    assert (tmp_path / "s.b_star.svg").exists() and (tmp_path / "s.b_e.svg").exists()


def test_sweep_independent_of_threads(capsys):
    argv = ["sweep", "--model", "jd", "--parameter", "beta", "--grid", "0.2:1:5"]
    one = run(argv + ["--threads", "1"], capsys)[1]
    four = run(argv + ["--threads", "4"], capsys)[1]
    assert one == four


def test_simulate_outputs(tmp_path, capsys):
    target = tmp_path / "path.csv"
    argv = ["simulate", "--model", "jd", "--x0", "5", "--horizon", "2", "--dt", "0.01",
            "--paths", "200", "--out", str(target)]
    assert cli.main(argv) == 0
    lines = target.read_text().splitlines()
    assert lines[0] == "time,u,l_cum,r_cum" and len(lines) == 202
    lumps = json.loads((tmp_path / "path.lumps.json").read_text())["lump_events"]
    assert lumps[0]["time"] == 0.0 and lumps[0]["kind"] == "dividend"
    est = json.loads((tmp_path / "path.estimate.json").read_text())
    assert est["exponential"]["n"] == 200


def test_simulate_deterministic_across_threads(tmp_path):
    outs = []
    for t in (1, 3):
        target = tmp_path / f"p{t}.csv"
        assert cli.main(["simulate", "--horizon", "1", "--paths", "300", "--threads", str(t),
                         "--out", str(target)]) == 0
        outs.append((target.read_bytes(), (tmp_path / f"p{t}.estimate.json").read_bytes()))
    assert outs[0] == outs[1]


def test_console_entry_point():
    env = dict(os.environ, LEVY_BARRIER_THREADS="1")
    out = subprocess.run([sys.executable, "-m", "levy_barrier.cli", "barriers", "--lambda", "0"],
                         capture_output=True, text=True, env=env)
    assert out.returncode == 0
    doc = json.loads(out.stdout)
    assert doc["b_star"] == pytest.approx(doc["b_e"], abs=1e-9)


def test_verify_fast(capsys):
    code, out, _ = run(["verify", "--fast"], capsys)
    assert code == 0
    assert "FAIL" not in out
    assert out.strip().endswith("checks passed")
