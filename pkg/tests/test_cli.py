from __future__ import annotations

import json
from fractions import Fraction

import pytest

from simplemech.cli import main
from simplemech.model import DiscreteMarginal, instance_to_dict, make_instance

F = Fraction


@pytest.fixture
def instance_file(tmp_path):
    inst = make_instance([[DiscreteMarginal.uniform([1, 2]), DiscreteMarginal.point(1)]] * 2)
    path = tmp_path / "inst.json"
    path.write_text(json.dumps(instance_to_dict(inst)))
    return path


def run(argv):
    return main([str(a) for a in argv])


def test_solve_is_byte_identical(instance_file, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["solve", instance_file, "--out", a]) == 0
    assert run(["solve", instance_file, "--out", b]) == 0
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    assert rep["command"] == "solve" and rep["objective_equals_2_sum_Q"]


def test_rational_matches_float(instance_file, tmp_path):
    a, b = tmp_path / "f.json", tmp_path / "r.json"
    run(["solve", instance_file, "--out", a])
    run(["solve", instance_file, "--arith", "rational", "--out", b])
    qf = json.loads(a.read_text())["Q"]
    qr = json.loads(b.read_text())["Q"]
    assert all(abs(float(F(y)) - float(x)) < 1e-9 for x, y in zip(qf, qr))


def test_opt_and_compare(instance_file, tmp_path):
    out = tmp_path / "c.json"
    assert run(["compare", instance_file, "--out", out]) == 0
    row = json.loads(out.read_text())
    assert row["opt"] >= max(row["rev_rpp"], row["rev_tpt"]) - 1e-9
    assert run(["opt", instance_file, "--out", tmp_path / "o.json"]) == 0


def test_sample_prints_N(instance_file, tmp_path, capsys):
    log = tmp_path / "log.csv"
    assert run(["sample", instance_file, "--eps", "0.1", "--delta", "0.1", "--log", log, "--out", "-"]) == 0
    cap = capsys.readouterr()
    rep = json.loads(cap.out)
    assert rep["N"] == 220 and "N = 220" in cap.err
    assert "rescaled" in cap.err
    assert log.read_text().startswith("trial,i,j,draw,value")


def test_diagnose_instance_and_report(instance_file, tmp_path):
    solved = tmp_path / "s.json"
    run(["solve", instance_file, "--out", solved])
    assert run(["diagnose", instance_file, "--out", tmp_path / "d1.json"]) == 0
    assert run(["diagnose", solved, "--out", tmp_path / "d2.json"]) == 0


def test_exit_codes(instance_file, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    assert run(["solve", bad]) == 2
    assert run(["solve", tmp_path / "missing.json"]) == 2
    assert run(["opt", instance_file, "--cap", "3"]) == 3


def test_selftest_subset(capsys):
    assert run(["selftest", "--only", "6", "--out", "-"]) == 0
    cap = capsys.readouterr()
    rep = json.loads(cap.out)
    assert [c["number"] for c in rep["criteria"]] == [6] and rep["criteria"][0]["pass"]
    assert cap.err.startswith("PASS criterion 6")
