import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from cdtriality.cli import main


@pytest.fixture(scope="module")
def exported(tmp_path_factory):
    out = tmp_path_factory.mktemp("catalog")
    assert main(["examples", "--id", "ex1", "--export", str(out)]) == 0
    assert main(["examples", "--id", "all", "--export", str(out)]) == 0
    return out


def run(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_solve_ex1_certified(exported, capsys):
    code, out, _ = run(["solve", "--instance", str(exported / "ex1.json")], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["outcome"] == "certified"
    assert np.abs(np.array(doc["global_minimizer"]["x"]) - [0.54792514555217, 1.003890602479819]).max() <= 1e-8
    assert doc["critical_pairs"][0]["verdict"]["label"] == "GlobalMin"


def test_solve_ex4_exit_codes(exported, capsys):
    code, out, _ = run(["solve", "--instance", str(exported / "ex4.json")], capsys)
    assert code == 3 and json.loads(out)["global_minimizer"] is None
    code, out, _ = run(["solve", "--instance", str(exported / "ex4.json"), "--perturb"], capsys)
    assert code == 2
    gm = json.loads(out)["global_minimizer"]
    assert gm["certificate"] == "perturbation-selected"
    assert np.abs(np.array(gm["x"]) - [0.0, 2.0]).max() <= 1e-4


def test_solve_writes_out_file(exported, tmp_path, capsys):
    target = tmp_path / "r.json"
    code, out, _ = run(["solve", "--instance", str(exported / "ex2.json"), "--out", str(target)], capsys)
    assert code == 0 and out == ""
    assert len(json.loads(target.read_text())["critical_pairs"]) >= 2


def test_solve_malformed(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{ nope")
    code, _, err = run(["solve", "--instance", str(bad)], capsys)
    assert code == 1 and "invalid JSON" in err
    bad.write_text('{"n": 2, "A": [[1]]}')
    assert run(["solve", "--instance", str(bad)], capsys)[0] == 1
    assert run(["solve", "--instance", str(tmp_path / "missing.json")], capsys)[0] == 1


def test_solve_invalid_instance(tmp_path, capsys):
    doc = {"n": 1, "A": [[1.0]], "exp_terms": [{"B": [[-1.0]], "alpha": 0.0}], "f": [1.0]}
    path = tmp_path / "neg.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(["solve", "--instance", str(path)], capsys)
    assert code == 1 and "B1 not PSD" in err


def test_solve_flags_override(exported, capsys):
    code, out, _ = run(["solve", "--instance", str(exported / "ex1.json"), "--seed", "7", "--starts", "16"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["seed"] == 7 and doc["options"]["starts"] == 16


def test_examples_rows(capsys):
    code, out, _ = run(["examples", "--id", "ex3"], capsys)
    assert code == 0 and "PASS" in out and "3/3 pairs" in out
    code, out, _ = run(["examples", "--id", "all"], capsys)
    assert code == 0 and out.count("PASS") == 4


def test_examples_unknown_id(capsys):
    code, _, err = run(["examples", "--id", "ex9"], capsys)
    assert code == 1 and "ex9" in err


def test_grid_dual_ex1_maximum(exported, capsys):
    code, out, _ = run(["grid", "--instance", str(exported / "ex1.json"), "--function", "dual",
                        "--range", "tau1:0.4:3,sigma1:-0.99:2", "--res", "200"], capsys)
    assert code == 0
    doc = json.loads(out)
    vals = np.array([np.nan if v is None else v for v in doc["values"]]).reshape(200, 200)
    mask = np.array(doc["mask"]).reshape(200, 200)
    plus = np.where(mask == "plus", vals, -np.inf)
    r, c = np.unravel_index(np.argmax(plus), plus.shape)
    tau, sig = np.linspace(0.4, 3, 200)[c], np.linspace(-0.99, 2, 200)[r]
    assert abs(tau - 1.171057661103504) <= 0.02 and abs(sig + 0.34599084656216) <= 0.02


def test_grid_primal_ex4_minima(exported, tmp_path, capsys):
    svg = tmp_path / "ex4.svg"
    code, out, _ = run(["grid", "--instance", str(exported / "ex4.json"), "--function", "primal",
                        "--range", "x:-3:3,y:-3:3", "--res", "61", "--svg", str(svg)], capsys)
    assert code == 0
    vals = np.array(json.loads(out)["values"]).reshape(61, 61)
    ys, xs = np.unravel_index(np.argsort(vals, axis=None)[:2], vals.shape)
    grid = np.linspace(-3, 3, 61)
    pts = sorted(zip(grid[xs], grid[ys]), key=lambda p: p[1])
    assert np.allclose(pts, [(0.0, -2.0), (0.0, 2.0)], atol=1e-9)
    root = ET.parse(svg).getroot()
    assert root.tag.endswith("svg") and root.get("version") == "1.1"
    assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) > 0


def test_grid_errors(exported, tmp_path, capsys):
    base = ["grid", "--instance", str(exported / "ex1.json"), "--function", "primal", "--range", "x:-1:1,y:-1:1"]
    code, _, err = run(base + ["--res", "0"], capsys)
    assert code == 1 and "resolution" in err
    code, _, _ = run(["grid", "--instance", str(exported / "ex1.json"), "--function", "primal",
                      "--range", "x1:1:0,x2:-1:1", "--res", "5"], capsys)
    assert code == 1
    net = tmp_path / "net.json"
    net.write_text(json.dumps({"dim": 3, "sensors": 2, "distances": [{"i": 0, "j": 1, "d": 1.0}]}))
    inst = tmp_path / "inst.json"
    assert main(["sensors", "--network", str(net), "--out", str(inst)]) == 0
    code, _, err = run(["grid", "--instance", str(inst), "--function", "primal",
                        "--range", "x:-1:1,y:-1:1", "--res", "5"], capsys)
    assert code == 1 and "--fix" in err
    code, _, _ = run(["grid", "--instance", str(inst), "--function", "primal", "--range", "x:-1:1,y:-1:1",
                      "--res", "5", "--fix", "x3=0", "--fix", "x4=0", "--fix", "x5=0", "--fix", "x6=0"], capsys)
    assert code == 0


def test_sensors_command(tmp_path, capsys):
    net = tmp_path / "line.json"
    net.write_text(json.dumps({"dim": 1, "sensors": 2, "distances": [{"i": 0, "j": 1, "d": 1.0}]}))
    code, out, _ = run(["sensors", "--network", str(net)], capsys)
    doc = json.loads(out)
    assert code == 0 and len(doc["quartic_terms"]) == 1 and doc["exp_terms"] == []
    net.write_text(json.dumps({"dim": 2, "sensors": 2,
                               "anchors": [{"index": 0, "pos": [0, 0]}, {"index": 1, "pos": [1, 0]}],
                               "distances": [{"i": 0, "j": 1, "d": 1.0}]}))
    code, _, err = run(["sensors", "--network", str(net)], capsys)
    assert code == 1 and "constant term" in err
    net.write_text("[]")
    assert run(["sensors", "--network", str(net)], capsys)[0] == 1


def test_perturb_command(exported, capsys):
    code, out, _ = run(["perturb", "--instance", str(exported / "ex4.json")], capsys)
    doc = json.loads(out)
    assert code == 0 and len(doc["stages"]) == 12
    assert np.abs(np.array(doc["limit_estimate"]) - [0.0, 2.0]).max() <= 1e-4
    code, _, err = run(["perturb", "--instance", str(exported / "ex4.json"), "--E", "[[1,0],[0,-1]]"], capsys)
    assert code == 1 and "schedule" in err


def test_instance_round_trip_through_cli(exported):
    from cdtriality import ProblemInstance
    text = (exported / "ex3.json").read_text()
    doc = json.loads(text)
    again = ProblemInstance.from_dict(doc).to_dict()
    assert again == {k: v for k, v in doc.items() if k != "perturbation"}


def test_module_entry_point(exported):
    proc = subprocess.run([sys.executable, "-m", "cdtriality", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "cdtriality" in proc.stdout
