from __future__ import annotations

import json

import pytest

from confmc import __version__
from confmc.cli import build_parser, cli_main


@pytest.fixture
def table1_files(tmp_path):
    model = tmp_path / "table1.json"
    query = tmp_path / "table1.query.json"
    assert cli_main(["gen", "table1", "-o", str(model), "--query-out", str(query)]) == 0
    return str(model), str(query)


def _json_out(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


def test_version(capsys):
    assert cli_main(["version"]) == 0
    assert capsys.readouterr().out.strip() == f"confmc {__version__}"


def test_gen_writes_model_and_query(table1_files):
    model, query = table1_files
    data = json.loads(open(model).read())
    assert data["actions"] == ["a", "b"]
    assert json.loads(open(query).read())["semantics"] == "csmt"


def test_gen_to_stdout(capsys):
    assert cli_main(["gen", "exam", "--sets", "2", "--grades", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["states"] == ["R", "grade_1", "grade_2"]


def test_gen_table1_stdout_feeds_step(tmp_path, capsys):
    query = tmp_path / "table1.query.json"
    assert cli_main(["gen", "table1", "--query-out", str(query)]) == 0
    model = tmp_path / "table1.json"
    model.write_text(capsys.readouterr().out)
    assert cli_main(["step", "-m", str(model), "-q", str(query), "--semantics", "msmt", "--format", "json"]) == 0
    rec = _json_out(capsys)
    assert rec["details"]["successors"] == [{"config": ["0", "13/50", "37/50"], "prob": "1"}]


def test_step_msmt_json(table1_files, capsys):
    model, query = table1_files
    capsys.readouterr()
    assert cli_main(["step", "-m", model, "-q", query, "-s", "msmt", "--format", "json"]) == 0
    rec = _json_out(capsys)
    assert rec["command"] == "step"
    assert rec["semantics"] == "msmt"
    assert rec["details"]["successors"] == [{"config": ["0", "13/50", "37/50"], "prob": "1"}]


def test_step_cross_check(table1_files, capsys):
    model, query = table1_files
    assert cli_main(["step", "-m", model, "-q", query, "-s", "msct", "--method", "both", "--format", "json"]) == 0
    assert len(_json_out(capsys)["details"]["successors"]) == 4


def test_check_csmt_finds_witness(table1_files, capsys):
    model, query = table1_files
    capsys.readouterr()
    rc = cli_main(["check-csmt", "-m", model, "-q", query, "--K", "3", "--seed", "0", "--format", "json"])
    assert rc == 0
    rec = _json_out(capsys)
    assert rec["verdict"] == "reachable"
    assert rec["witness"] == ["b"]
    assert rec["options"]["K"] == 3


def test_check_csmt_text_output(table1_files, capsys):
    model, query = table1_files
    capsys.readouterr()
    assert cli_main(["check-csmt", "-m", model, "-q", query]) == 0
    out = capsys.readouterr().out
    assert out.startswith("check-csmt: reachable")
    assert "witness   : b" in out


def test_explore_subsetsum(tmp_path, capsys):
    model, query = tmp_path / "ss.json", tmp_path / "ss.query.json"
    argv = ["gen", "subsetsum", "--set", "1,2,3", "--target", "3", "-o", str(model), "--query-out", str(query)]
    assert cli_main(argv) == 0
    dot = tmp_path / "ss.dot"
    capsys.readouterr()
    rc = cli_main(["explore", "-m", str(model), "-q", str(query), "--depth", "1", "--dot", str(dot), "--format", "json"])
    assert rc == 0
    rec = _json_out(capsys)
    assert rec["probabilities"]["reach"] == "1/4"
    assert rec["details"]["settled"] is True
    assert dot.read_text().startswith("digraph")


def test_simulate_estimate(table1_files, capsys):
    model, query = table1_files
    capsys.readouterr()
    rc = cli_main(["simulate", "-m", model, "-q", query, "--runs", "50", "--steps", "3", "--seed", "1", "--format", "json"])
    assert rc == 0
    rec = _json_out(capsys)
    assert rec["verdict"] == "estimated"
    assert rec["details"]["runs"] == 50
    assert rec["seed"] == 1


def test_initial_override(table1_files, capsys):
    model, query = table1_files
    capsys.readouterr()
    rc = cli_main(["step", "-m", model, "-q", query, "-s", "msmt", "--initial", "0,1,0", "--format", "json"])
    assert rc == 0
    assert _json_out(capsys)["details"]["successors"][0]["config"] == ["0", "1", "0"]


def test_missing_file_exit_code(tmp_path, capsys):
    rc = cli_main(["step", "-m", str(tmp_path / "nope.json"), "-q", str(tmp_path / "nope.json")])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_invalid_model_exit_code(tmp_path, table1_files, capsys):
    _, query = table1_files
    bad = tmp_path / "bad.json"
    bad.write_text('{"states": ["q0"], "actions": ["a"], "transitions": {"a": [["1/2"]]}}')
    assert cli_main(["step", "-m", str(bad), "-q", query]) == 2


def test_missing_solver_exit_code(table1_files, capsys):
    model, query = table1_files
    rc = cli_main([
        "check-msct", "-m", model, "-q", query, "--degree", "2",
        "--solver-cmd", "confmc-no-such-solver-binary",
    ])
    assert rc == 3


def test_parser_rejects_unknown_semantics():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["step", "-m", "a", "-q", "b", "-s", "fuzzy"])
