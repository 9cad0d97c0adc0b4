import json

import pytest

from app import cli
from app.data import SAMPLE_FANS, sample_subdivision
from app.db_service import list_audit_events, list_runs
from app.models import CheckReport, FunctionSpec, SubdivisionSpec, VerifyInput


def _edge_split_inputs() -> VerifyInput:
    sample = sample_subdivision("edge_split")
    return VerifyInput(
        subdivision=SubdivisionSpec.from_subdivision(sample.subdivision),
        l_hat=FunctionSpec.from_function(sample.l_hat),
    )


def test_ih_json(write_json, capsys):
    path = write_json("fan.json", SAMPLE_FANS["four_quadrants"])
    assert cli.main(["ih", path]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["betti"] == "0:1 2:2 4:1"
    assert report["dims"] == {"0": 1, "2": 2, "4": 1}


def test_ih_tsv(write_json, capsys):
    path = write_json("fan.json", SAMPLE_FANS["octahedron"])
    assert cli.main(["ih", path, "--format", "tsv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["degree\tdim", "0\t1", "2\t3", "4\t3", "6\t1"]


def test_ih_reports_relative_classes_on_a_cone(write_json, capsys):
    path = write_json("fan.json", SAMPLE_FANS["quadrant"])
    assert cli.main(["ih", path]) == 0
    assert json.loads(capsys.readouterr().out)["relative"] == {"4": 1}


def test_output_file(write_json, tmp_path, capsys):
    path = write_json("fan.json", SAMPLE_FANS["line"])
    target = tmp_path / "report.json"
    assert cli.main(["ih", path, "--output", str(target)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(target.read_text())["betti"] == "0:1 2:1"


def test_local_h_tsv(write_json, capsys):
    sample = sample_subdivision("edge_split")
    path = write_json("sub.json", SubdivisionSpec.from_subdivision(sample.subdivision))
    assert cli.main(["local-h", path, "--format", "tsv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "cone\trays\tdegree\tdim"
    top = sample.subdivision.target.maximal[0]
    assert f"{top}\t0,1\t2\t1" in lines
    assert len(lines) == 3


def test_decompose(write_json, capsys):
    sample = sample_subdivision("edge_split")
    path = write_json("sub.json", SubdivisionSpec.from_subdivision(sample.subdivision))
    assert cli.main(["decompose", path]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["w"]["provenance"] == "pi_*L"
    assert len(report["w"]["cones"]) == 2
    assert set(report["stalks"]) == {str(s) for s in range(len(sample.subdivision.target))}


def test_invalid_json_is_an_input_error(tmp_path, capsys):
    path = tmp_path / "fan.json"
    path.write_text("{not json")
    assert cli.main(["ih", str(path)]) == 2
    assert "input error" in capsys.readouterr().err


def test_missing_file_is_an_input_error(tmp_path, capsys):
    assert cli.main(["ih", str(tmp_path / "missing.json")]) == 2
    assert "InputError" in capsys.readouterr().err


def test_bad_fan_is_an_input_error(write_json, capsys):
    path = write_json("fan.json", {"dim": 2, "rays": [[0, 0]], "cones": [[0]]})
    assert cli.main(["ih", path]) == 2
    assert "DegenerateRay" in capsys.readouterr().err


def test_uncertified_hypothesis_exit_code(write_json, capsys):
    inputs = VerifyInput(fan=SAMPLE_FANS["four_quadrants"], l=FunctionSpec(linear=[1, 0]))
    path = write_json("inputs.json", inputs)
    assert cli.main(["verify", "hl", path]) == 4
    assert "NotStrictlyConvex" in capsys.readouterr().err


def test_missing_verifier_input(write_json):
    path = write_json("inputs.json", {"fan": SAMPLE_FANS["quadrant"].model_dump()})
    assert cli.main(["verify", "convex", path]) == 2


def test_failed_statement_exit_code(write_json, monkeypatch, capsys):
    monkeypatch.setattr(cli.fan_service, "verify", lambda *a, **k: CheckReport(name="hl", passed=False))
    path = write_json("inputs.json", {})
    assert cli.main(["verify", "hl", path, "--format", "tsv"]) == 1
    assert capsys.readouterr().out.splitlines()[-1] == "passed\tfalse"


def test_verify_rhl(write_json, capsys):
    path = write_json("inputs.json", _edge_split_inputs())
    assert cli.main(["verify", "rhl", path]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is True
    assert report["kind"] == "lefschetz"


def test_subdivide_star(write_json, capsys):
    path = write_json("fan.json", SAMPLE_FANS["quadrant"])
    assert cli.main(["subdivide", "star", path, "--cone", "0,1", "--ray", "1,1"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert len(report["source"]["rays"]) == 3
    assert len(report["source"]["cones"]) == 2


def test_subdivide_star_needs_a_cone(write_json):
    path = write_json("fan.json", SAMPLE_FANS["quadrant"])
    assert cli.main(["subdivide", "star", path]) == 2


def test_subdivide_barycentric(write_json, capsys):
    path = write_json("fan.json", SAMPLE_FANS["delta2_cone"])
    assert cli.main(["subdivide", "barycentric", path]) == 0
    report = json.loads(capsys.readouterr().out)
    assert len(report["source"]["cones"]) == 6


def test_complete_fan(write_json, capsys):
    path = write_json("fan.json", SAMPLE_FANS["quadrant"])
    assert cli.main(["complete-fan", path, "--ray=-1,-1"]) == 0
    assert len(json.loads(capsys.readouterr().out)["cones"]) == 3


def test_tsv_is_not_available_for_subdivisions(write_json):
    path = write_json("fan.json", SAMPLE_FANS["quadrant"])
    assert cli.main(["complete-fan", path, "--ray=-1,-1", "--format", "tsv"]) == 2


def test_recorded_runs(write_json, db, capsys):
    path = write_json("inputs.json", _edge_split_inputs())
    assert cli.main(["verify", "rhl", path, "--record"]) == 0
    (run,) = list_runs(db, "verify:rhl")[:1]
    assert run.status == "passed"
    assert run.exit_code == 0
    assert run.report["passed"] is True
    actions = [e.action for e in list_audit_events(db, run.run_id)]
    assert "check.started" in actions and "check.completed" in actions


def test_recorded_errors(write_json, db):
    inputs = VerifyInput(fan=SAMPLE_FANS["four_quadrants"], l=FunctionSpec(linear=[1, 0]))
    path = write_json("inputs.json", inputs)
    assert cli.main(["verify", "hr", path, "--record"]) == 4
    run = list_runs(db, "verify:hr")[0]
    assert run.status == "error"
    assert run.exit_code == 4


@pytest.mark.parametrize("argv", [["ih"], ["verify", "nonsense", "x.json"]])
def test_usage_errors_exit_through_argparse(argv):
    with pytest.raises(SystemExit) as info:
        cli.main(argv)
    assert info.value.code == 2


@pytest.mark.parametrize(
    "command, name, extra",
    [
        ("ih", "cube", []),
        ("ih", "octahedron", ["--format", "tsv"]),
        ("local-h", "delta2_barycentric", ["--format", "tsv"]),
        ("decompose", "delta2_barycentric", []),
    ],
)
def test_output_is_identical_across_runs(write_json, capsys, command, name, extra):
    if command == "ih":
        path = write_json("input.json", SAMPLE_FANS[name])
    else:
        path = write_json("input.json", SubdivisionSpec.from_subdivision(sample_subdivision(name).subdivision))
    outputs = []
    for _ in range(2):
        assert cli.main([command, path, *extra]) == 0
        outputs.append(capsys.readouterr().out)
    assert outputs[0]
    assert outputs[0] == outputs[1]
