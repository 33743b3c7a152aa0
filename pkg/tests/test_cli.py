import json

import pytest

from dstruct import io
from dstruct.cli import main
from dstruct.generators import path_graph


@pytest.fixture
def p3_files(tmp_path):
    space = tmp_path / "p3.json"
    func = tmp_path / "u.json"
    io.write_atomic(space, io.space_to_json(path_graph(3)))
    io.write_atomic(func, {"values": [0.0, 1.0, 2.0]})
    return space, func


def test_repro(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["repro", "l1-not-l2", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())["report"]
    assert rep["details"]["Du_on_B"] == pytest.approx(0.5, abs=1e-6)
    assert "holds-on-sample" in capsys.readouterr().out


def test_repro_single_vertex():
    assert main(["repro", "l1-not-l2", "--n-vertices", "1"]) == 1


def test_minimize(p3_files, tmp_path):
    space, func = p3_files
    out = tmp_path / "m.json"
    code = main(["minimize", "--space", str(space), "--function", str(func),
                 "--structure", "graph", "--out", str(out)])
    assert code == 0
    assert json.loads(out.read_text())["result"]["energy"] == pytest.approx(2 / 3, abs=1e-6)


def test_energy_subset(p3_files, tmp_path):
    space, func = p3_files
    out = tmp_path / "e.json"
    code = main(["energy", "--space", str(space), "--function", str(func),
                 "--structure", "graph", "--subset", "0", "--out", str(out)])
    assert code == 0
    assert json.loads(out.read_text())["energy"] == 0.0


def test_check_l5_fails_on_p2(tmp_path):
    space = tmp_path / "p2.json"
    io.write_atomic(space, io.space_to_json(path_graph(2)))
    out = tmp_path / "c.json"
    code = main(["check", "--space", str(space), "--structure", "graph", "--prop", "L5",
                 "--trials", "10", "--seed", "42", "--out", str(out)])
    assert code == 1
    rep = json.loads(out.read_text())["reports"][0]
    assert rep["verdict"] == "fails-with-witness" and rep["witness"]["margin"] >= 0.1


def test_check_multiple_props_pass(tmp_path):
    code = main(["check", "--structure", "hajlasz", "--prop", "A1", "--prop", "A2",
                 "--trials", "5", "--seed", "1"])
    assert code == 0


def test_audit_exit_follows_consistency():
    assert main(["audit", "--structure", "graph", "--trials", "5", "--seed", "1"]) == 0


def test_cotangent_small(tmp_path):
    out = tmp_path / "ct.json"
    code = main(["cotangent", "verify", "--grid", "4", "--trials", "5", "--seed", "7",
                 "--out", str(out)])
    assert code == 0
    reports = json.loads(out.read_text())["reports"]
    assert reports["uniqueness"]["verdict"] == "holds-on-sample"


def test_cotangent_rejects_graph_structure():
    assert main(["cotangent", "verify", "--grid", "4", "--trials", "2", "--seed", "7",
                 "--structure", "graph"]) == 2


def test_generate_to_stdout(capsys):
    assert main(["generate", "interval", "--n", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["breakpoints"] == [0.0, 0.5, 1.0]


@pytest.mark.parametrize("argv", [
    ["check", "--structure", "graph", "--prop", "L5"],                    # no seed
    ["check", "--structure", "graph", "--prop", "L5", "--seed", "1", "--p", "1"],
    ["check", "--structure", "sobolev", "--prop", "L5", "--seed", "1"],
    ["minimize", "--space", "/nonexistent.json", "--function", "/x.json",
     "--structure", "graph"],
    [],
])
def test_config_errors(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err


def test_invalid_space_rejected(tmp_path):
    bad = tmp_path / "bad.json"
    io.write_atomic(bad, {"kind": "finite_metric", "dist": [[0, 1, 3], [1, 0, 1], [3, 1, 0]],
                          "weights": [1, 1, 1]})
    func = tmp_path / "u.json"
    io.write_atomic(func, {"values": [0, 1, 2]})
    assert main(["minimize", "--space", str(bad), "--function", str(func),
                 "--structure", "hajlasz"]) == 2


def test_incompatible_structure(p3_files):
    space, func = p3_files
    assert main(["minimize", "--space", str(space), "--function", str(func),
                 "--structure", "interval_derivative"]) == 2


def test_byte_identical_reports(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        main(["check", "--structure", "graph", "--prop", "L3", "--trials", "8",
              "--seed", "3", "--out", str(out)])
    assert a.read_bytes() == b.read_bytes()
