from __future__ import annotations

import json

import numpy as np
import pytest

from conerepair import cli
from conerepair.errors import NumericalError
from conerepair.fileformat import parse_problem, serialize
from conerepair.generators import arbitrage
from conerepair.problem import make_program
from conerepair.regularizers import ScaledL1, ScaledL2Sq
from conerepair.repair import RepairSettings, repair

BOUNDS = make_program([[-1.0], [1.0]], [0.0, 0.0], [0.0], [("nonneg", 2)], [(None, [-1.0, 0.0], None)])


@pytest.fixture
def bounds_file(tmp_path):
    path = tmp_path / "bounds.txt"
    serialize(path, BOUNDS, [1.0], ScaledL2Sq([1.0], [1.0]))
    return path


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def field(out: str, name: str) -> str:
    for line in out.splitlines():
        if line.startswith(name + ":"):
            return line.split(":", 1)[1].strip()
    raise KeyError(name)


def test_diagnose_trivial_lp_is_solvable(tmp_path, capsys):
    path = tmp_path / "lp.txt"
    # minimize x subject to x >= 1
    serialize(path, make_program([[-1.0]], [-1.0], [1.0], [("nonneg", 1)]), [], ScaledL1([], []))
    code, out, _ = run(["diagnose", path], capsys)
    assert code == cli.EXIT_OK
    assert field(out, "verdict") == "SOLVABLE"
    assert field(out, "problem solver status") == "SOLVED"


def test_diagnose_generated_arbitrage(tmp_path, capsys):
    path = tmp_path / "arb.txt"
    assert run(["gen", "arbitrage", "-o", path], capsys)[0] == 0
    code, out, _ = run(["diagnose", path], capsys)
    assert code == cli.EXIT_NOT_REPAIRED
    assert field(out, "verdict") == "UNSOLVABLE"
    assert field(out, "problem solver status") == "UNBOUNDED_CERT"


def test_diagnose_identity_payoff(tmp_path, capsys):
    # each outcome pays its own wager: w = 1 is an arbitrage
    path = tmp_path / "eye.txt"
    prob = arbitrage(np.eye(3), zero_weight=1.0)
    serialize(path, prob.pcp, prob.theta0, prob.regularizer)
    code, out, _ = run(["diagnose", path], capsys)
    assert code == cli.EXIT_NOT_REPAIRED
    assert field(out, "verdict") == "UNSOLVABLE"


def test_gen_arbitrage_rejects_zero_entry(tmp_path, capsys):
    csv = tmp_path / "R.csv"
    csv.write_text("1,0\n0.5,2\n")
    code, _, err = run(["gen", "arbitrage", "--payoff", csv], capsys)
    assert code == cli.EXIT_INPUT
    assert "R0[0, 1]" in err


def test_repair_report_matches_library(bounds_file, tmp_path, capsys):
    out_json = tmp_path / "report.json"
    code, out, _ = run(["repair", bounds_file, "--alpha0", "0.5", "--out", out_json, "--trace"], capsys)
    assert code == cli.EXIT_OK
    report = json.loads(out_json.read_text())
    pcp, theta0, reg = parse_problem(bounds_file)
    ref = repair(pcp, reg, theta0, RepairSettings(alpha0=0.5))
    assert report["status"] == ref.status.value == "REPAIRED"
    assert report["theta_final"] == ref.theta.tolist()
    assert report["final_tstar"] == ref.tstar
    assert report["final_r"] == ref.r_value
    assert report["initial_tstar"] == ref.initial_tstar
    assert len(report["trace"]) == len(ref.trace)
    for got, e in zip(report["trace"], ref.trace):
        assert (got["lambda"], got["alpha"], got["tstar"], got["r"], got["accepted"]) == (
            e.lam, e.alpha, e.tstar, e.r_value, e.accepted)
    assert report["input_digest"].startswith("sha256:")
    assert report["settings"]["alpha0"] == 0.5
    # text output carries the same numbers at full precision
    assert float(field(out, "final tstar")) == ref.tstar
    assert field(out, "theta") == "[" + ", ".join(repr(float(t)) for t in ref.theta) + "]"


def test_repair_already_solvable(tmp_path, capsys):
    path = tmp_path / "ok.txt"
    serialize(path, BOUNDS, [-0.25], ScaledL2Sq([1.0], [1.0]))
    code, out, _ = run(["repair", path], capsys)
    assert code == cli.EXIT_OK
    assert field(out, "theta") == "[-0.25]"
    assert field(out, "iterations") == "0"


def test_repair_not_repaired_exit_code(tmp_path, capsys):
    path = tmp_path / "path.txt"
    pcp = make_program([[0.0]], [1.0], [0.0], [("zero", 1)], [([[1.0]], None, None)])
    serialize(path, pcp, [0.0], ScaledL1([1.0], [0.0]))
    code, out, _ = run(["repair", path, "--max-iters", "5"], capsys)
    assert code == cli.EXIT_NOT_REPAIRED
    assert field(out, "status") == "MAX_ITERS"


def test_exact_repair(bounds_file, capsys):
    code, out, _ = run(["exact-repair", bounds_file], capsys)
    assert code == cli.EXIT_OK
    assert abs(float(field(out, "final r")) - 1.0) <= 1e-5
    code2, out2, _ = run(["repair", bounds_file, "--exact"], capsys)
    assert code2 == cli.EXIT_OK
    assert field(out2, "theta") == field(out, "theta")


def test_exact_requires_constant_A(tmp_path, capsys):
    path = tmp_path / "a.txt"
    pcp = make_program([[0.0]], [1.0], [0.0], [("zero", 1)], [([[1.0]], None, None)])
    serialize(path, pcp, [0.0], ScaledL1([1.0], [0.0]))
    code, _, err = run(["repair", path, "--exact"], capsys)
    assert code == cli.EXIT_INPUT
    assert "independent of theta" in err


def test_jitter_is_seeded(bounds_file, tmp_path, capsys):
    outs = []
    for seed in (1, 1, 2):
        out_json = tmp_path / f"r{seed}.json"
        run(["repair", bounds_file, "--jitter", "0.1", "--seed", seed, "--out", out_json], capsys)
        outs.append(json.loads(out_json.read_text())["theta0"])
    assert outs[0] == outs[1] != outs[2]


def test_parse_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("conerepair-problem 1\ndims 1 1 0\ncones\n  soc 0\nend\n")
    code, _, err = run(["diagnose", path], capsys)
    assert code == cli.EXIT_INPUT
    assert f"{path}:4:7:" in err


def test_bad_arguments_exit_code(capsys):
    assert run(["frobnicate"], capsys)[0] == cli.EXIT_INPUT
    assert run(["repair"], capsys)[0] == cli.EXIT_INPUT


def test_solver_error_exit_code(bounds_file, capsys, monkeypatch):
    def boom(*args, **kwargs):
        raise NumericalError("iterates diverged")

    monkeypatch.setattr(cli, "eval_tstar", boom)
    code, _, err = run(["diagnose", bounds_file], capsys)
    assert code == cli.EXIT_SOLVER
    assert "diverged" in err
