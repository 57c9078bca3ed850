import csv
import io
import json
from importlib import resources

import pytest

from onlinerel.cli import main

DATA = resources.files("onlinerel") / "data"
MODEL = str(DATA / "blade.ft")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_ok_and_broken(capsys, tmp_path):
    code, out, _ = run(capsys, "validate", MODEL)
    assert code == 0 and json.loads(out)["valid"] is True
    bad = tmp_path / "bad.ft"
    bad.write_text('event E1 "x" p=2\ngate G OR E1 E9\ntop G\n')
    code, out, _ = run(capsys, "validate", str(bad))
    assert code == 1
    diags = json.loads(out)["diagnostics"]
    assert {d["line"] for d in diags} == {1, 2}


def test_eval_baseline(capsys):
    code, out, _ = run(capsys, "eval", MODEL)
    assert code == 0
    assert json.loads(out)["bsfp"] == "2.114E-4"


def test_eval_single_case(capsys, tmp_path):
    case = tmp_path / "c.json"
    case.write_text(json.dumps({"label": "C2", "observations": [
        {"event": "BE1", "kind": "hard", "value": False},
        {"event": "BE2", "kind": "hard", "value": False},
        {"event": "BE14", "kind": "hard", "value": True},
    ]}))
    code, out, _ = run(capsys, "eval", MODEL, str(case))
    assert code == 0
    rep = json.loads(out)
    assert rep["bsfp"] == "1.065E-3" and rep["direction"] == "up"


@pytest.mark.parametrize("table", ["binary", "soft", "mixed"])
def test_cases_json_csv_agree(capsys, table):
    path = str(DATA / f"cases_{table}.json")
    code, js, _ = run(capsys, "cases", MODEL, path)
    assert code == 0
    code, cs, _ = run(capsys, "cases", MODEL, path, "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(cs)))
    reports = json.loads(js)
    assert [r["case"] for r in rows] == [r["case"] for r in reports]
    assert [r["bsfp"] for r in rows] == [r["bsfp"] for r in reports]
    assert [r["pct_change"] for r in rows] == [r["pct_change"] for r in reports]


def test_cases_partial_failure(capsys, tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps([
        {"label": "ok", "observations": [{"event": "BE14", "kind": "hard", "value": True}]},
        {"label": "bad", "observations": [{"event": "BE99", "kind": "hard", "value": True}]},
    ]))
    code, out, err = run(capsys, "cases", MODEL, str(path))
    assert code == 1
    labels = [r["case"] for r in json.loads(out)]
    assert labels == ["ok", "bad"]
    assert "BE99" in err


def test_sweep_csv(capsys):
    code, out, _ = run(capsys, "sweep", MODEL, "BE14", "--grid", "0:1:5", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 5
    values = [float(r["bsfp"]) for r in rows]
    assert values == sorted(values)


def test_sweep_bad_grid(capsys):
    code, _, err = run(capsys, "sweep", MODEL, "BE14", "--grid", "a:b")
    assert code in (1, 2)
    assert "error" in json.loads(err)


def test_verify_strict(capsys):
    code, out, _ = run(capsys, "verify-paper", MODEL, "--strict")
    assert code == 0
    assert json.loads(out)["baseline"] == "2.114E-4"


def test_gate(capsys, tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text("\n".join(str(i) for i in range(20)))
    b.write_text("\n".join(str(i + 100) for i in range(20)))
    code, out, _ = run(capsys, "gate", str(a), str(a))
    assert code == 0 and json.loads(out)["decision"]["action"] == "Proceed"
    code, out, _ = run(capsys, "gate", str(a), str(b), "--measure", "kuiper")
    assert json.loads(out)["decision"]["action"] == "ManualInspection"


def test_gate_env_thresholds(capsys, tmp_path, monkeypatch):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text("\n".join(str(i) for i in range(20)))
    b.write_text("\n".join(str(i + 3) for i in range(20)))
    monkeypatch.setenv("ONLINEREL_TAU_LOW", "0.1")
    monkeypatch.setenv("ONLINEREL_TAU_HIGH", "0.2")
    code, out, _ = run(capsys, "gate", str(a), str(b))
    assert json.loads(out)["decision"]["action"] == "Proceed"
    code, _, err = run(capsys, "gate", str(a), str(b), "--tau-low", "0.9", "--tau-high", "0.5")
    assert code == 1 and json.loads(err)["error"]


def test_simulate_deterministic(capsys, tmp_path):
    scen = str(DATA / "scenario_be14.json")
    out1 = tmp_path / "one.json"
    out2 = tmp_path / "two.json"
    caps = tmp_path / "caps.jsonl"
    assert main(["simulate", MODEL, scen, "-o", str(out1), "--captures", str(caps)]) == 0
    assert main(["simulate", MODEL, scen, "-o", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    doc = json.loads(out1.read_text())
    assert doc["timeline"][-1]["bsfp"] == "1.066E-3"
    assert len(caps.read_text().splitlines()) == 12


def test_session_stream(capsys, tmp_path, monkeypatch):
    stream = tmp_path / "s.jsonl"
    stream.write_text(
        '{"event": "BE14", "kind": "scaled", "pct": 10}\n'
        '{"event": "BE14", "kind": "scaled", "pct": 20}\n'
    )
    log = tmp_path / "log.jsonl"
    code, out, _ = run(capsys, "session", MODEL, str(stream), "--log", str(log), "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["case"] for r in rows] == ["step1", "step2"]
    assert [json.loads(x)["step"] for x in log.read_text().splitlines()] == [1, 2]
    monkeypatch.setattr("sys.stdin", io.StringIO('{"event": "BE5", "kind": "hard", "value": true}\n'))
    code, _, err = run(capsys, "session", MODEL, "-", "--observable", "BE1,BE2,BE14")
    assert code == 1 and "not observable" in json.loads(err)["message"]


def test_output_file_written_atomically(capsys, tmp_path):
    target = tmp_path / "out.json"
    target.write_text("old")
    assert main(["eval", MODEL, "-o", str(target)]) == 0
    assert json.loads(target.read_text())["bsfp"] == "2.114E-4"
    assert [p.name for p in tmp_path.iterdir()] == ["out.json"]


def test_missing_file_and_usage_errors(capsys):
    code, _, err = run(capsys, "eval", "/nonexistent.ft")
    assert code == 1 and json.loads(err)["error"] == "file-not-found"
    code, _, _ = run(capsys, "eval")
    assert code == 2
    code, _, _ = run(capsys, "frobnicate")
    assert code == 2


def test_module_entry_point():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "onlinerel", "eval", MODEL, "--format", "csv"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1].startswith("baseline")
