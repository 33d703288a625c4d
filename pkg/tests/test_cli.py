import csv
import json
import math

import pytest

from rescocycle.cli import main

CURVED = {"metric": {"11": "1+0.2*cos(x1)", "22": "1+0.1*sin(x1)"}, "B": {"234": "0.3*cos(x1)"}}


def run(tmp_path, cmd, cfg, *extra, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    out = tmp_path / (name + ".out")
    code = main([cmd, "--config", str(path), "--out", str(out), *extra])
    report = json.loads(out.read_text()) if out.exists() else None
    return code, report, out


def test_heat_reports(tmp_path):
    code, rep, _ = run(tmp_path, "heat", {"dimension": 4, "mode": "rational"})
    assert code == 0
    c = rep["points"][0]["coefficients"]
    assert c["Theta_0"]["symbol"] == {"1": "1"}
    assert c["Theta_1"]["symbol"] == {}
    assert rep["prefactors"]
    code, rep, _ = run(tmp_path, "heat", {"dimension": 4, "mode": "rational", "manifold": {"B": {"123": "1/2"}}})
    c = rep["points"][0]["coefficients"]
    # 2 |B|^2 with |B|^2 = 1/4
    assert c["Theta_bar_1"]["symbol"] == {"1": "1/2"}
    assert c["Theta_0"]["symbol"] == {"1": "1"}


def test_heat_rational_needs_polynomials(tmp_path):
    code, _, _ = run(tmp_path, "heat", {"dimension": 4, "mode": "rational",
                                        "manifold": {"metric": {"11": "1+sin(x1)^2"}}})
    assert code == 1


def test_cocycle_flat_phi4(tmp_path):
    cfg = {"dimension": 4, "grid": 8, "p": 4,
           "functions": {"a": ["cos(x1)*cos(x2)*cos(x3)*cos(x4)", "sin(x1)", "sin(x2)", "sin(x3)", "sin(x4)"]}}
    code, rep, _ = run(tmp_path, "cocycle", cfg)
    assert code == 0
    val = rep["phi"]["4"]["value"]
    re = val["re"] if isinstance(val, dict) else val
    assert abs(re + math.pi ** 2 / 96) < 1e-8


def test_cocycle_flat_phi2_zero_and_csv(tmp_path):
    cfg = {"dimension": 4, "grid": 4, "p": 2, "functions": {"a": ["sin(x1)", "cos(x2)", "sin(x1+x2)"]}}
    code, rep, out = run(tmp_path, "cocycle", cfg, "--csv", str(tmp_path / "t.csv"))
    assert code == 0
    assert rep["phi"]["2"]["berezin_integral"] == 0
    assert {c["c_prime"] for c in rep["phi"]["2"]["constants"] if c["k"] in ([1, 0], [0, 1], [0, 0])} \
        == {"-1/6", "-1/3", "1/2"}
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0][:4] == ["x1", "x2", "x3", "x4"] and len(rows) == 4 ** 4 + 1


def test_cocycle_index_report(tmp_path):
    code, rep, _ = run(tmp_path, "cocycle", {"dimension": 4, "grid": 4, "p": 0, "functions": {"a": ["1"]}})
    assert code == 0 and "index_of_D" in rep["phi"]["0"]


def test_index_command(tmp_path):
    cfg = {"dimension": 4, "grid": 4, "functions": {"idempotent": [["1", "0"], ["0", "0"]]}}
    code, rep, _ = run(tmp_path, "index", cfg)
    assert code == 0
    assert rep["nearest_integer"] == 0 and rep["distance_to_integer"] < 1e-12


@pytest.mark.parametrize("cfg,code", [
    ({"dimension": 3}, 1),
    ({"dimension": 4, "grid": 2}, 1),
    ({"dimension": 4, "bogus": 1}, 1),
    ({"dimension": 4, "manifold": {"metric": {"11": "1+x1"}}}, 1),
    ({"dimension": 4, "manifold": {"metric": {"11": "sin(x1)"}}, "grid": 4}, 3),
])
def test_exit_codes_cocycle(tmp_path, cfg, code):
    assert run(tmp_path, "cocycle", cfg)[0] == code


def test_exit_codes_misc(tmp_path):
    assert main(["heat", "--config", str(tmp_path / "missing.json")]) == 1
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["heat", "--config", str(tmp_path / "bad.json")]) == 1
    cfg = {"dimension": 4, "grid": 4, "functions": {"idempotent": [["1", "1"], ["0", "0"]]}}
    assert run(tmp_path, "index", cfg)[0] == 0
    cfg = {"dimension": 4, "grid": 4, "functions": {"idempotent": [["1", "1"], ["1", "0"]]}}
    assert run(tmp_path, "index", cfg)[0] == 3


def test_verify_exit_and_rows(tmp_path):
    cfg = {"dimension": 4, "seed": 3, "verify": {"samples_n4": 1, "suites": ["n4", "dbzero", "bismut"]}}
    code, rep, _ = run(tmp_path, "verify", cfg)
    assert code == 0
    assert rep["all_expected_zero_residuals_zero"]
    assert rep["notes"]["Theta_1^B sign"] == ["-c(dB)"]


def test_verify_n6_reports_mismatch(tmp_path):
    cfg = {"dimension": 6, "seed": 0, "verify": {"samples_n6": 1}}
    code, rep, _ = run(tmp_path, "verify", cfg)
    rows = [r for r in rep["rows"] if r["check"].startswith("n6 phi0")]
    assert rows and "variants" in rows[0]["detail"]
    assert code == (2 if any(not r["ok"] for r in rep["rows"]) else 0)


def test_determinism(tmp_path):
    cfg = {"dimension": 4, "grid": 4, "manifold": CURVED, "p": 2,
           "functions": {"a": ["sin(x1)", "cos(x1)", "cos(x1)"], "family": ["sin(x1)", "cos(x1)", "cos(x3)"]}}
    _, _, o1 = run(tmp_path, "cocycle", cfg, name="a.json")
    _, _, o2 = run(tmp_path, "cocycle", cfg, name="b.json")
    assert o1.read_bytes() == o2.read_bytes()
    v = {"dimension": 4, "seed": 5, "verify": {"samples_n4": 1, "suites": ["n4"]}}
    _, _, o3 = run(tmp_path, "verify", v, name="c.json")
    _, _, o4 = run(tmp_path, "verify", v, name="d.json")
    assert o3.read_bytes() == o4.read_bytes()
