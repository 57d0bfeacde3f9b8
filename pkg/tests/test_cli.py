import csv
import io
import json

import pytest

from systolica import cli
from systolica.constructors import besse_quotient_profile, ellipsoid_profile, zoll_profile
from systolica.profile_core import BranchFunction, Profile, dumps, save


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, prof in {"zoll": zoll_profile(2, 1), "ell": ellipsoid_profile(1, 2),
                       "besse": besse_quotient_profile(5)}.items():
        paths[name] = tmp_path / f"{name}.json"
        save(prof, paths[name])
    # J = 1 - |k| has jump -2, wrong for e = 1
    bad = Profile(1, -1.0, 1.0, BranchFunction.polynomial([-1.0, 0.0], [[0.0, 1.0]]),
                  BranchFunction.polynomial([0.0, 1.0], [[1.0, -1.0]]))
    paths["jump"] = tmp_path / "jump.json"
    save(bad, paths["jump"])
    paths["junk"] = tmp_path / "junk.json"
    paths["junk"].write_text("{not json")
    return paths


def test_validate_exit_codes(capsys, files, tmp_path):
    assert run(capsys, "validate", files["zoll"])[0] == 0
    code, out, _ = run(capsys, "validate", files["jump"])
    assert code == 1 and json.loads(out)["ok"] is False
    assert [c["name"] for c in json.loads(out)["checks"] if not c["passed"]] == ["derivative_jump"]
    assert run(capsys, "validate", files["junk"])[0] == 2
    assert run(capsys, "validate", tmp_path / "missing.json")[0] == 2


def test_construct_roundtrip(capsys, tmp_path):
    out = tmp_path / "p.json"
    assert run(capsys, "construct", "ellipsoid", "--a1", 1, "--a2", 2, "--out", out)[0] == 0
    assert out.read_text() == dumps(ellipsoid_profile(1, 2)) + ("" if dumps(ellipsoid_profile(1, 2)).endswith("\n") else "\n")
    assert run(capsys, "construct", "eta", "--e", 3, "--eta", 0.2)[0] == 2


def test_analyze_examples(capsys, files):
    code, out, _ = run(capsys, "analyze", files["ell"])
    rep = json.loads(out)
    assert code == 0
    assert rep["systole"]["value"] == pytest.approx(1.0) and rep["volume"] == pytest.approx(2.0)
    assert rep["ratio"] == pytest.approx(0.5) and rep["theorem"]["branch"] == "e=1"
    rep = json.loads(run(capsys, "analyze", files["besse"])[1])
    assert rep["contractible_systole"]["value"] == pytest.approx(1.0) and rep["contractible"]["equality_flag"]
    rep = json.loads(run(capsys, "analyze", files["zoll"])[1])
    assert rep["theorem"]["equality_flag"] and rep["classification"] == "Zoll"


def test_analyze_csv_is_orbit_table(capsys, files):
    code, out, _ = run(capsys, "analyze", files["ell"], "--format", "csv", "--q-max", 3)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and {r["kind"] for r in rows} == {"section", "endpoint_fiber"}


def test_sweep_eta(capsys):
    code, out, _ = run(capsys, "sweep-eta", "--e", 3, "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and tuple(rows[0]) == cli.SWEEP_CSV_COLUMNS
    ratios = [float(r["ratio"]) for r in rows]
    assert all(r < 0.5 for r in ratios) and ratios == sorted(ratios) and ratios[-1] >= 0.49
    rows = json.loads(run(capsys, "sweep-eta", "--e", 10)[1])
    assert all(r["ratio"] < 0.5 for r in rows)
    assert run(capsys, "sweep-eta", "--e", 3, "--eta", 0.2)[0] == 2
    assert run(capsys, "sweep-eta", "--e", 2)[0] == 2


def test_audit_small_and_deterministic(capsys):
    args = ("audit", "--e-list", "1,3", "--count", 6, "--seed", 4, "--roundtrip-every", 5)
    code, out, _ = run(capsys, *args)
    summary = json.loads(out)
    assert code == 0 and set(summary) == {"1", "3"}
    assert summary["3"]["min_margin"] > 0 and summary["1"]["min_margin"] >= -1e-9
    assert summary["3"]["roundtrip_checked"] == 2
    assert run(capsys, *args)[1] == out


def test_audit_parallel_matches_serial(capsys, monkeypatch):
    args = ("audit", "--e-list", "2,5", "--count", 5, "--roundtrip-every", 0)
    serial = run(capsys, *args)[1]
    monkeypatch.setenv("SYSTOLICA_THREADS", "2")
    assert run(capsys, *args)[1] == serial


def test_audit_empty_and_bad_input(capsys):
    code, out, _ = run(capsys, "audit", "--count", 0)
    assert code == 0 and json.loads(out) == {}
    assert run(capsys, "audit", "--e-list", "0,1", "--count", 1)[0] == 2
    assert run(capsys, "audit", "--count", -1)[0] == 2


def test_revolution_presets(capsys, tmp_path):
    code, out, _ = run(capsys, "revolution", "--preset", "round")
    rep = json.loads(out)
    assert code == 0 and rep["report"]["equality_flag"]
    assert all(c["rel_diff"] < 1e-5 for c in rep["ode_cross_check"])
    rep = json.loads(run(capsys, "revolution", "--preset", "perturbed")[1])
    assert rep["report"]["ratio"] < 1
    path = tmp_path / "m.json"
    # rho = 1.2 sin x has rho'(0) = 1.2: a pole violation
    path.write_text(json.dumps({"format": "systolica-revmetric/1", "L": 3.141592653589793,
                                "rho": {"kind": "sine", "coefficients": [1.2]}}))
    assert run(capsys, "revolution", path)[0] == 2
    assert run(capsys, "revolution")[0] == 2


def test_trajectory_and_geodesic_exports(capsys, files):
    code, out, _ = run(capsys, "trajectory", files["zoll"], "--k", 0.3, "--format", "csv")
    assert code == 0 and out.splitlines()[0] == "lambda,r,s,t"
    assert run(capsys, "trajectory", files["zoll"], "--k", 0.0)[0] == 2
    code, out, _ = run(capsys, "geodesic", "--preset", "perturbed", "--x", 1.0, "--length", 100)
    assert code == 0 and json.loads(out)["clairaut_drift"] <= 1e-8


def test_bad_numeric_options(capsys, files):
    assert run(capsys, "analyze", files["zoll"], "--q-max", 0)[0] == 2
    assert run(capsys, "audit", "--count", 1, "--grid", 1)[0] == 2
