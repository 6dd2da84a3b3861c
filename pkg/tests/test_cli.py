import io
import json

import pytest

from msfeec import mesh as M
from msfeec.cli import main


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def workdir(tmp_path):
    M.save_mesh(M.two_cell_mesh(2), tmp_path / "two_tri.json")
    cfg = {"mesh": "two_tri.json", "problem": {"kind": "hodge_laplace", "n": 2, "k": 0},
           "method": {"variant": "LDG_H", "r": 1}, "boundary": {"seed": 3},
           "verify": ["local_ms", "strong_ms", "jump_identity", "conservativity", "reciprocity"],
           "label": "poisson"}
    (tmp_path / "poisson_ldgh.json").write_text(json.dumps(cfg))
    return tmp_path


def test_solve_writes_solution(workdir):
    code, out, _ = run(["solve", "--config", str(workdir / "poisson_ldgh.json"), "--out", str(workdir / "o")])
    assert code == 0
    data = json.loads((workdir / "o" / "poisson_solution.json").read_text())
    assert data["variant"] == "LDG_H"
    assert data["metadata"]["residual"] < 1e-10
    assert "rank" in data["metadata"]


def test_missing_mesh_names_the_path(workdir):
    cfg = json.loads((workdir / "poisson_ldgh.json").read_text())
    cfg["mesh"] = "nowhere.json"
    (workdir / "bad.json").write_text(json.dumps(cfg))
    code, _, err = run(["solve", "--config", str(workdir / "bad.json")])
    assert code == 2 and "nowhere.json" in err


@pytest.mark.parametrize("patch,needle", [
    ({"method": {"variant": "FOO"}}, "unknown variant"),
    ({"verify": ["bogus"]}, "unknown checks"),
    ({"problem": {"kind": "hodge_laplace", "n": 3, "k": 0}}, "dimension"),
    ({"method": {"variant": "IP_H"}, "problem": {"kind": "vvp", "n": 2, "k": 1}}, "IP"),
    ({"extra_key": 1}, "unknown config keys"),
])
def test_configuration_errors_exit_2(workdir, patch, needle):
    cfg = json.loads((workdir / "poisson_ldgh.json").read_text())
    cfg.update(patch)
    (workdir / "bad.json").write_text(json.dumps(cfg))
    code, _, err = run(["verify", "--config", str(workdir / "bad.json")])
    assert code == 2 and needle in err


def test_invalid_json_exit_2(workdir):
    (workdir / "broken.json").write_text("{not json")
    code, _, err = run(["solve", "--config", str(workdir / "broken.json")])
    assert code == 2 and "broken.json" in err


def test_singular_system_exits_zero_with_rank_report(tmp_path):
    cfg = {"mesh": {"builtin": "interval", "cells": 2}, "problem": {"kind": "hodge_laplace", "n": 1, "k": 1},
           "method": {"variant": "LDG_H"}, "boundary": {"seed": 0}, "label": "sing"}
    (tmp_path / "s.json").write_text(json.dumps(cfg))
    code, _, _ = run(["solve", "--config", str(tmp_path / "s.json"), "--out", str(tmp_path)])
    assert code == 0
    meta = json.loads((tmp_path / "sing_solution.json").read_text())["metadata"]
    assert "deficiency" in meta


def test_verify_config_checks_and_determinism(workdir):
    a, b = workdir / "a", workdir / "b"
    assert run(["verify", "--config", str(workdir / "poisson_ldgh.json"), "--out", str(a)])[0] == 0
    assert run(["verify", "--config", str(workdir / "poisson_ldgh.json"), "--out", str(b)])[0] == 0
    assert (a / "poisson_report.json").read_bytes() == (b / "poisson_report.json").read_bytes()
    assert (a / "poisson_report.csv").read_text().startswith("method,mesh,k,check")


def test_verify_suite_with_mesh(workdir):
    code, out, _ = run(["verify", "--suite", "ldgh-equal-order", "--mesh", str(workdir / "two_tri.json"),
                        "--out", str(workdir / "o")])
    assert code == 0 and out.count("pass ") == 3


def test_verify_cgh_suite_records_nonzero_strong(tmp_path):
    code, _, _ = run(["verify", "--suite", "cgh-counterexample", "--out", str(tmp_path), "--format", "json"])
    assert code == 0
    data = json.loads((tmp_path / "cgh-counterexample.json").read_text())
    region = [e for e in data["n2"]["entries"] if e["check"] == "cgh_region"][0]
    assert region["expect"] == "nonzero" and region["verdict"] == "pass"
    assert not (tmp_path / "cgh-counterexample.csv").exists()


def test_verify_xg_alpha_two(tmp_path):
    code, out, _ = run(["verify", "--suite", "xg-equivalence", "--alpha", "2", "--out", str(tmp_path),
                        "--format", "csv"])
    assert code == 0 and "alpha2" in out
    assert (tmp_path / "xg-equivalence.csv").exists()


def test_verdict_failure_exit_1(tmp_path):
    # a tolerance no computation can meet makes an asserted check fail
    code, out, _ = run(["verify", "--suite", "reciprocity", "--tol", "0", "--out", str(tmp_path)])
    assert code == 1 and "failing:" in out


def test_unknown_suite_exit_2(tmp_path):
    code, _, err = run(["verify", "--suite", "nope", "--out", str(tmp_path)])
    assert code == 2 and "unknown suite" in err


def test_newton_failure_exit_3(tmp_path):
    cfg = {"mesh": {"builtin": "eight_cell", "n": 2},
           "problem": {"kind": "hodge_laplace", "n": 2, "k": 1, "F": {"type": "quartic", "c": 1.0}},
           "method": {"variant": "LDG_H"}, "boundary": {"polynomial": {"constant": [0, 50.0, -80.0, 0]}},
           "newton": {"max_iter": 2}}
    (tmp_path / "n.json").write_text(json.dumps(cfg))
    code, _, err = run(["solve", "--config", str(tmp_path / "n.json"), "--out", str(tmp_path)])
    assert code == 3 and "numeric failure" in err
