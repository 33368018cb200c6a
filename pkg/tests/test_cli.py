import json
import subprocess
import sys
from pathlib import Path

import pytest

import crowdsweep
from crowdsweep.cli import run

SCEN = Path(crowdsweep.__file__).parent / "scenarios"


def _write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(data if isinstance(data, str) else json.dumps(data))
    return str(p)


@pytest.mark.parametrize("name", ["ex1", "ex2", "ex3"])
def test_solve2_then_verify(tmp_path, name):
    sol = tmp_path / "sol.json"
    assert run(["solve2", "--scenario", str(SCEN / f"{name}.json"), "--out", str(sol)]) == 0
    rep = tmp_path / "rep.json"
    code = run(["verify", "--scenario", str(SCEN / f"{name}.json"), "--solution", str(sol),
                "--tol", "1e-6", "--out", str(rep)])
    assert code == 0
    report = json.loads(rep.read_text())
    assert report["overall"] and all(c["pass"] for c in report["conditions"])


def test_solve2_ex1_content(tmp_path):
    out = tmp_path / "s.json"
    run(["solve2", "--scenario", str(SCEN / "ex1.json"), "--out", str(out)])
    d = json.loads(out.read_text())
    assert d["branch"] == "contact-positive-eta"
    assert d["J"] == pytest.approx(45.9, abs=0.1)


def test_solve2_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(["solve2", "--scenario", str(SCEN / "ex3.json"), "--out", str(a)])
    run(["solve2", "--scenario", str(SCEN / "ex3.json"), "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_verify_perturbed_exit_1(tmp_path):
    out = tmp_path / "s.json"
    run(["solve2", "--scenario", str(SCEN / "ex1.json"), "--out", str(out)])
    from crowdsweep.model import bundled_scenario
    from crowdsweep.two_body import solution_for_controls

    d = json.loads(out.read_text())
    pert = solution_for_controls(bundled_scenario("ex1"), d["a"][0] + 0.5, d["a"][1])
    p = _write(tmp_path, "pert.json", pert.to_dict())
    assert run(["verify", "--scenario", str(SCEN / "ex1.json"), "--solution", p, "--out",
                str(tmp_path / "r.json")]) == 1


def test_simulate_zero_controls(tmp_path, capsys):
    assert run(["simulate", "--scenario", str(SCEN / "ex2.json"), "--a", "0,0", "--steps", "4"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert rows[0] == "t,x1_1,x1_2,x2_1,x2_2,eta_1_2"
    assert len({r.split(",", 1)[1] for r in rows[1:]}) == 1


def test_simulate_frozen_to_file(tmp_path):
    out = tmp_path / "t.csv"
    assert run(["simulate", "--scenario", str(SCEN / "ex1.json"), "--a", "3.12,1.56", "--steps", "100",
                "--frozen-angles", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 102


def test_sweep(tmp_path, capsys):
    out = tmp_path / "sw.csv"
    assert run(["sweep", "--scenario", str(SCEN / "ex1.json"), "--grid", "0:4:1", "--steps", "60",
                "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "a1,a2,J" and len(lines) == 26
    assert "best a=" in capsys.readouterr().out


def test_sweep_budget(capsys):
    code = run(["sweep", "--scenario", str(SCEN / "ex1.json"), "--grid", "0:5:0.001", "--steps", "10"])
    assert code == 2
    assert "refusing sweep" in capsys.readouterr().err


def test_constants(capsys):
    assert run(["constants", "--n", "3", "--R", "3"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["beta"] == pytest.approx(216 * 6**0.5, abs=1e-9)
    assert run(["constants", "--n", "2", "--R", "3"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["beta_defined"] is False and d["M1"] == d["M2"] == 2**0.5


def test_input_errors_distinct(tmp_path, capsys):
    bad = _write(tmp_path, "bad.json", "{oops")
    base = json.loads((SCEN / "ex1.json").read_text())
    overlap = dict(base, participants=[{"x0": [-50, 50], "speed": 6}, {"x0": [-48, 48], "speed": 3}])
    three = dict(base, participants=base["participants"] + [{"x0": [40, 0], "speed": 1}])
    messages = []
    for path in (bad, _write(tmp_path, "ov.json", overlap), _write(tmp_path, "n3.json", three)):
        assert run(["solve2", "--scenario", path]) == 2
        messages.append(capsys.readouterr().err)
    assert "malformed JSON" in messages[0]
    assert "infeasible" in messages[1]
    assert "exactly 2 participants" in messages[2]
    assert len(set(messages)) == 3


def test_usage_errors(capsys):
    assert run([]) == 2
    assert run(["nope"]) == 2
    assert run(["simulate", "--scenario", str(SCEN / "ex1.json"), "--a", "x", "--steps", "3"]) == 2
    assert run(["simulate", "--scenario", str(SCEN / "ex1.json"), "--a", "1,1", "--steps", "0"]) == 2
    assert run(["simulate", "--scenario", str(SCEN / "ex1.json"), "--a", "1", "--steps", "3"]) == 2
    assert run(["solve2", "--scenario", "/does/not/exist.json"]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "crowdsweep", "constants", "--n", "4", "--R", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["n"] == 4
