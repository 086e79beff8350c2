import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from currentlab.cli import main
from currentlab.scene import SceneError, load_scene, parse_scene

DEMO = Path(__file__).resolve().parents[1] / "scenes" / "demo.json"

MINIMAL = {
    "version": 1, "m": 1,
    "forms": {"one": {"degree": 1, "terms": [{"index": [1], "expr": "1"}]}},
    "currents": {"unit": {"type": "simplex", "vertices": [[0], [1]]}},
    "experiments": [{"id": "length", "kind": "evaluate", "T": "unit", "phi": "one"}],
}


def write(tmp_path, data, name="scene.json"):
    p = tmp_path / name
    p.write_text(data if isinstance(data, str) else json.dumps(data))
    return p


def test_minimal_scene_loads():
    scene = parse_scene(MINIMAL)
    assert scene.m == 1 and set(scene.currents) == {"unit"}
    assert scene.currents["unit"].evaluate(scene.forms["one"]) == pytest.approx(1.0)


def test_unresolved_reference_is_reported():
    bad = json.loads(json.dumps(MINIMAL))
    bad["experiments"][0]["T"] = "T9"
    with pytest.raises(SceneError) as info:
        parse_scene(bad)
    assert any("T9" in p for p in info.value.problems)


def test_dimension_mismatch_is_reported():
    bad = json.loads(json.dumps(MINIMAL))
    bad["currents"]["unit"]["vertices"] = [[0, 0], [1, 0]]
    with pytest.raises(SceneError) as info:
        parse_scene(bad)
    assert "unit" in str(info.value)


def test_expression_error_names_the_position():
    bad = json.loads(json.dumps(MINIMAL))
    bad["forms"]["one"]["terms"][0]["expr"] = "1 + * x1"
    with pytest.raises(SceneError) as info:
        parse_scene(bad)
    assert "one" in str(info.value)


def test_json_error_reports_line_and_column(tmp_path):
    p = write(tmp_path, '{\n  "version": 1,\n  "m": 1,,\n}')
    with pytest.raises(SceneError) as info:
        load_scene(p)
    assert "line 3" in str(info.value) and "column" in str(info.value)


def test_run_evaluate_writes_csv_and_json(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--scene", str(write(tmp_path, MINIMAL)), "--out", str(out)]) == 0
    rows = list(csv.reader((out / "length.csv").open()))
    body = json.loads((out / "length.json").read_text())
    assert float(rows[1][-1]) == pytest.approx(1.0)
    assert body["id"] == "length"
    assert "length" in capsys.readouterr().out


def test_bad_scene_exits_with_one(tmp_path, capsys):
    assert main(["run", "--scene", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    p = write(tmp_path, "{ nope")
    assert main(["run", "--scene", str(p), "--out", str(tmp_path)]) == 1
    assert "error:" in capsys.readouterr().err


def test_unknown_experiment_exits_with_one(tmp_path):
    assert main(["run", "--scene", str(DEMO), "--experiment", "nope", "--out", str(tmp_path)]) == 1


def test_divergence_csv_and_exit_codes(tmp_path):
    args = ["run", "--scene", str(DEMO), "--experiment", "dirac-line", "--out", str(tmp_path)]
    assert main(args) == 0
    with (tmp_path / "dirac-line.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 8
    assert main(args + ["--expect-convergence"]) == 2


def test_flags_override_the_schedule(tmp_path):
    main(["run", "--scene", str(DEMO), "--experiment", "dirac-line", "--levels", "5", "--out", str(tmp_path)])
    with (tmp_path / "dirac-line.csv").open() as fh:
        assert len(list(csv.DictReader(fh))) == 5


def test_converging_experiment_exits_zero_when_expected(tmp_path):
    args = ["run", "--scene", str(DEMO), "--experiment", "axes", "--out", str(tmp_path), "--expect-convergence"]
    assert main(args) == 0


def test_list_fixtures(capsys):
    assert main(["list-fixtures"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) >= 5
    assert main(["list-fixtures", "--json"]) == 0
    body = json.loads(capsys.readouterr().out)
    assert len(body["fixtures"]) == len(lines)
    assert main(["list-fixtures", "--group", "kronecker", "--json"]) == 0
    body = json.loads(capsys.readouterr().out)
    assert {f["group"] for f in body["fixtures"]} == {"kronecker"}


def test_reproduce_list(capsys):
    assert main(["reproduce", "--list", "--out", "unused"]) == 0
    names = capsys.readouterr().out.split()
    assert names[0].startswith("divergence") and "kronecker" in names


def test_demo_scene_is_deterministic(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    main(["run", "--scene", str(DEMO), "--out", str(a)])
    main(["run", "--scene", str(DEMO), "--out", str(b)])
    main(["run", "--scene", str(DEMO), "--out", str(c), "--threads", "4"])
    files = sorted(p.name for p in a.iterdir())
    assert len(files) == 22
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes() == (c / name).read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "currentlab", "run", "--scene", str(DEMO),
                           "--experiment", "dirac-line", "--out", str(tmp_path), "--expect-convergence"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "DIVERGED" in proc.stdout
