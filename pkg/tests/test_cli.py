import json

import pytest

from mbtkit import cli
from mbtkit.simulator import ExecutionResult, FAIL


def test_validate_ok(capsys):
    assert cli.main(["validate", "corpus/atm/model.mbt"]) == 0
    assert "0 error(s)" in capsys.readouterr().out


def test_invalid_model_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.mbt"
    bad.write_text("model m\nstate A initial\ntrans t: A -> B on S\n")
    assert cli.main(["validate", str(bad)]) == 1
    assert cli.main(["generate", str(bad)]) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_criterion_exits_two(capsys):
    assert cli.main(["generate", "--criterion", "nonsense", "corpus/ping.mbt"]) == 2
    assert "transition" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["generate", "missing.mbt"],
    ["generate", "corpus/ping.mbt", "--profile", "missing.profile"],
    ["all", "corpus/ping.mbt"],
    ["explore", "corpus/ping.mbt", "--depth", "0"],
    ["frobnicate"],
])
def test_usage_errors(argv):
    assert cli.main(argv) == 2


def test_help_exits_zero(capsys):
    assert cli.main(["--help"]) == 0
    assert "adequacy" in capsys.readouterr().out


def test_generate_to_stdout(capsys):
    assert cli.main(["generate", "--criterion", "transition", "corpus/ping.mbt"]) == 0
    captured = capsys.readouterr()
    doc = json.loads(captured.out)
    assert len(doc["cases"]) == 1
    assert "transition" in captured.err


def test_explore_with_inline_scenario(capsys):
    assert cli.main(["explore", "corpus/ping.mbt", "--scenario", "PING ; PING"]) == 0
    assert len(json.loads(capsys.readouterr().out)["edges"]) == 2


def test_unknown_scenario_event_exits_one():
    assert cli.main(["explore", "corpus/ping.mbt", "--scenario", "PANG"]) == 1


def test_all_writes_every_file(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["all", "corpus/atm/model.mbt", "--out", str(out), "--mutants", "5"]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"graph.json", "suite.json", "coverage.json", "coverage.txt", "adequacy.json",
            "TSS.md", "TP.md", "TD.md", "TC.md", "traceability.md"} <= names
    suite = json.loads((out / "suite.json").read_text())
    assert suite["suite"]["metadata"]["run"]["criterion"] == "transition"
    assert json.loads((out / "adequacy.json").read_text())["total"] == 5


def test_profile_option(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["docs", "corpus/rx/model.mbt", "--profile", "corpus/rx/profiles/no-video.profile",
                     "--criterion", "requirement", "--out", str(out)]) == 0
    rows = json.loads((out / "traceability.json").read_text())["rows"]
    assert {r["requirement"]: r["status"] for r in rows}["RQ-RX-02"] == "excluded-by-profile"


def test_self_check_failure_exits_three(monkeypatch, tmp_path):
    monkeypatch.setattr(cli, "run", lambda tc, sut: ExecutionResult(tc.id, FAIL, 0, "forced"))
    assert cli.main(["generate", "corpus/ping.mbt", "--out", str(tmp_path)]) == 3


def test_budget_and_boundary_flags(capsys):
    assert cli.main(["generate", "corpus/atm/model.mbt", "--data", "boundary", "--criterion",
                     "boundary_value", "--budget-test", "1", "--budget-step", "1", "--budget-max", "1000"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["suite"]["metadata"]["budget"] is not None
