import json
import math

import numpy as np
import pytest

from toricvol import ConvexGridFn, standard_polytopes
from toricvol.cli import main
from toricvol.io import clean, dumps, read_grid_csv, sidecar_path, write_grid_csv
from toricvol.polytope import polytope_to_dict

STD = standard_polytopes()


def _write_polytope(tmp_path, name):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(polytope_to_dict(STD[name])))
    return str(path)


def test_clean_rounds_and_encodes():
    from fractions import Fraction
    out = clean({"a": 1 / 3, "b": Fraction(9, 2), "c": [math.inf, -math.inf], "d": np.int64(3)})
    assert out == {"a": 0.333333333333, "b": "9/2", "c": ["inf", "-inf"], "d": 3}
    assert dumps({"b": 1, "a": 2}).index('"a"') < dumps({"b": 1, "a": 2}).index('"b"')


def test_grid_csv_round_trip(tmp_path):
    f = ConvexGridFn.from_callable(lambda p, q: p ** 2 + np.abs(q), [(-1, 2), (-3, 3)], 9,
                                   growth=STD["P1xP1"])
    f.values[0, 0] = np.inf
    path = tmp_path / "u.csv"
    write_grid_csv(f, path, meta={"note": "test"})
    assert sidecar_path(path).exists()
    g = read_grid_csv(path)
    assert np.array_equal(g.values, f.values)
    assert all(np.allclose(a, b) for a, b in zip(g.axes, f.axes))
    assert set(g.growth.normals) == set(STD["P1xP1"].normals)
    assert g.meta["note"] == "test"


def test_grid_csv_without_sidecar(tmp_path):
    f = ConvexGridFn.from_callable(lambda p: p ** 2, [(-1, 1)], 11)
    path = tmp_path / "u.csv"
    write_grid_csv(f, path)
    sidecar_path(path).unlink()
    g = read_grid_csv(path)
    assert np.allclose(g.values, f.values)


def test_analyze(tmp_path):
    out = tmp_path / "p2.json"
    assert main(["analyze", "--polytope", _write_polytope(tmp_path, "P2"), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    inv = rep["result"]["invariants"]
    assert inv["degree"]["exact"] == "9" and inv["equality"]
    assert rep["version"] and rep["config"]["seed"] == 7


def test_audit_dim2(tmp_path):
    out = tmp_path / "audit.json"
    assert main(["audit", "--dim", "2", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())["result"]
    assert rep["ok"] and rep["counts"]["ke"] == 3


def test_reports_are_deterministic(tmp_path):
    poly = _write_polytope(tmp_path, "P1")
    outs = []
    for k in range(2):
        out = tmp_path / f"solve{k}.csv"
        rep = tmp_path / f"solve{k}.json"
        assert main(["solve", "--polytope", poly, "--res", "129", "--box", "10",
                     "--out", str(out), "--report", str(rep)]) == 0
        outs.append((out.read_bytes(), rep.read_text().replace(f"solve{k}", "solve")))
    assert outs[0] == outs[1]


def test_green_and_bm_commands(tmp_path):
    desc = tmp_path / "ball.json"
    desc.write_text(json.dumps({"kind": "ball", "dim": 2}))
    rep = tmp_path / "green.json"
    assert main(["green", "--domain", str(desc), "--res", "33", "--report", str(rep)]) == 0
    s = np.linspace(-30, 0, 301)
    prof = tmp_path / "w.csv"
    write_grid_csv(ConvexGridFn((s,), 0.4 * s), prof)
    out = tmp_path / "bm.json"
    assert main(["bm", "--mode", "disc", "--in", str(prof), "--report", str(out)]) == 0
    assert json.loads(out.read_text())["result"]["holds"]


@pytest.mark.parametrize("argv", [
    ["analyze", "--polytope", "/nonexistent/p.json"],
    ["solve", "--polytope", "/nonexistent/p.json", "--res", "9"],
    ["mtcheck", "--ref", "/nonexistent/u.csv", "--tol", "-1"],
])
def test_input_errors_exit_3(argv, capsys):
    assert main(argv) == 3
    err = json.loads(capsys.readouterr().err)
    assert "error" in err


def test_error_report_written(tmp_path):
    rep = tmp_path / "err.json"
    assert main(["analyze", "--polytope", str(tmp_path / "missing.json"),
                 "--out", str(rep)]) == 3
    payload = json.loads(rep.read_text())
    assert payload["partial"] and payload["status"] == "error"


def test_non_reflexive_disc_mass_too_large(tmp_path):
    s = np.linspace(-30, 0, 301)
    prof = tmp_path / "w.csv"
    write_grid_csv(ConvexGridFn((s,), 1.5 * s), prof)
    assert main(["bm", "--mode", "disc", "--in", str(prof)]) == 3


@pytest.mark.slow
def test_pipeline_equality_case_is_not_a_contradiction(tmp_path):
    # P2 has degree exactly at the threshold; grid overshoot must not flip the verdict
    out = tmp_path / "pipe.json"
    code = main(["pipeline", "--polytope", _write_polytope(tmp_path, "P2"), "--res", "65",
                 "--report", str(out)])
    result = json.loads(out.read_text())["result"]
    assert code == 0
    assert result["stage_reached"] == "complete"
    assert result["brezis_merle"]["volume"] == 9
    assert not result["brezis_merle"]["probe"]["contradiction"]
    assert result["brezis_merle"]["synthetic_probe"]["contradiction"]
    assert result["sublevel_degree_error"] < 1e-2
