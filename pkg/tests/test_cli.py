import json
import math
from pathlib import Path

import pytest

from weilkit.cli import main

SCN = Path(__file__).resolve().parents[1] / "scenarios"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def result(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    doc = json.loads(out)
    assert set(doc) == {"manifest", "result"}
    return doc["result"]


def test_algebra(capsys):
    r = result(capsys, "algebra", "--spec", SCN / "e2.json")
    assert r["basis"] == ["1", "e", "e^2"] and r["k"] == 2


def test_transition(capsys):
    r = result(
        capsys, "transition", "--manifold", SCN / "squaring_plane.json", "--algebra", SCN / "e2.json",
        "--point", SCN / "transition_point.json",
    )
    assert r["real_coordinates"] == [1.0, 4.0, 10.0, 1.0, 3.0, 4.0]
    assert r["to"]["chart"] == "V"


def test_eval(capsys):
    r = result(
        capsys, "eval", "--manifold", "R^2", "--algebra", SCN / "e2.json", "--point", SCN / "transition_point.json",
        "--expr", "y + x",
    )
    assert r["value"] == {"1": 1.0, "e": 3.0, "e^2": 4.0}


def test_dist_box(capsys):
    r = result(capsys, "dist", "--scenario", SCN / "dist_box.json")
    assert r["distance"] == 2.5 and r["base"] == 0.0


def test_dist_inline_scenario(capsys):
    scn = {
        "manifold": "S1",
        "algebra": {"generators": ["e"], "relations": ["e^2"]},
        "a": {"acoords": [[0.0, 0.0]]},
        "b": {"acoords": [[1.0, 0.0]]},
    }
    r = result(capsys, "dist", "--scenario", json.dumps(scn))
    assert r["distance"] == pytest.approx(1.0)


def test_orbit(capsys):
    r = result(capsys, "orbit", "--scenario", SCN / "orbit_rotation.json")
    assert r["verdict"] == "wandering" and r["steps"] == 50


def test_fix_reflection(capsys):
    r = result(capsys, "fix", "--scenario", SCN / "reflect.json")
    reps = sorted(tuple(c["representative"]) for c in r["clusters"])
    assert len(reps) == 2
    assert reps[0] == (0.0, 0.0)
    assert reps[1][0] == pytest.approx(math.pi) and reps[1][1] == 0.0


def test_fix_rotation(capsys):
    r = result(capsys, "fix", "--scenario", SCN / "rotate.json")
    assert r["fixed_count"] == 0 and r["clusters"] == []


def test_c0_and_pwt(capsys):
    assert result(capsys, "c0", "--scenario", SCN / "c0_rotations.json")["c0_distance"] == pytest.approx(0.2)
    assert result(capsys, "pwt", "--scenario", SCN / "pwt_rotation.json")["pointwise_gap"] == pytest.approx(0.01)


def test_betti_and_bundle(capsys):
    assert result(capsys, "betti", "--spec", SCN / "triangle.json")["betti"] == [1, 1]
    r = result(capsys, "bundle-check", "--manifold", "T2", "--algebra", SCN / "t2_algebra.json")
    assert r["betti_bundle"] == [1, 2, 1] and r["match"]


def test_lift_map_and_path(capsys):
    r = result(capsys, "lift-map", "--scenario", SCN / "lift_rotation.json")
    assert r
    r = result(capsys, "lift-path", "--scenario", SCN / "path_r2.json")
    assert len(r["samples"]) == 5


def test_out_file(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, stdout, _ = run(capsys, "algebra", "--spec", SCN / "e2.json", "--out", out)
    assert code == 0 and stdout == ""
    assert json.loads(out.read_text())["result"]["dim"] == 3


@pytest.mark.parametrize(
    "argv",
    [
        ["algebra", "--spec", str(SCN / "e2.json")],
        ["dist", "--scenario", str(SCN / "dist_s1.json")],
        ["fix", "--scenario", str(SCN / "reflect.json")],
        ["pwt", "--scenario", str(SCN / "pwt_rotation.json"), "--seed", "7"],
    ],
)
def test_byte_identical_runs(capsys, argv):
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first == second and first[0] == 0


def test_manifest_records_inputs(capsys):
    code, out, _ = run(capsys, "c0", "--scenario", SCN / "c0_rotations.json", "--seed", "3")
    m = json.loads(out)["manifest"]
    assert m["command"] == "c0" and m["seed"] == 3 and len(m["inputs"]["scenario"]) == 64
    assert "wall_time_s" not in m
    code, out, _ = run(capsys, "algebra", "--spec", SCN / "e2.json", "--timing")
    assert "wall_time_s" in json.loads(out)["manifest"]


def error_code(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert out == ""
    return code, json.loads(err[err.index("{"):])["error"]["code"]


def test_error_codes(capsys):
    assert error_code(capsys, "betti", "--manifold", "RP3") == (1, "no_triangulation")
    code, name = error_code(capsys, "eval", "--manifold", "R^1", "--algebra", SCN / "e1.json",
                            "--point", '{"acoords": [[1, 0]]}', "--expr", "x +* 2")
    assert code == 1 and name == "syntax_error"
    code, name = error_code(capsys, "algebra", "--spec", '{"generators": ["e", "h"], "relations": ["e^2"]}')
    assert code == 1 and name == "non_nilpotent"
    code, name = error_code(capsys, "algebra", "--spec", "missing.json")
    assert code == 1 and name == "invalid_input"
    code, name = error_code(capsys, "dist", "--scenario", '{"manifold": "R^1", "algebra": {"generators": ["e"], "relations": ["e^2"]}}')
    assert code == 1 and name == "invalid_input"


def test_usage_error(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["no-such-command"])
    assert ei.value.code == 1
    assert '"usage"' in capsys.readouterr().err


def test_verify_subset(capsys):
    code, out, err = run(capsys, "verify", "--only", "1,2,12")
    assert code == 0
    r = json.loads(out)["result"]
    assert [c["number"] for c in r["checks"]] == [1, 2, 12] and not r["failed"]
    assert "[PASS]  1." in err


def test_error_codes_are_distinct():
    from weilkit import errors

    classes = [c for c in vars(errors).values() if isinstance(c, type) and issubclass(c, errors.WeilkitError)]
    codes = [c.code for c in classes]
    assert len(codes) == len(set(codes))
