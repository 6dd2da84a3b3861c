import pytest

from msfeec import mesh as M
from msfeec.hybrid import ConfigurationError
from msfeec.suites import CRITERIA, SUITES, newton_history_report, run_suite, thread_cap
from msfeec.verify import to_json_text


def test_every_criterion_has_a_suite():
    assert sorted(CRITERIA) == list(range(1, 13))
    assert all(name in SUITES for name in CRITERIA.values())


def test_unknown_suite():
    with pytest.raises(ConfigurationError):
        run_suite("nope")


def test_threads_do_not_change_results():
    serial = run_suite("jump-identity", threads=1)
    parallel = run_suite("jump-identity", threads=4)
    assert list(serial) == list(parallel)
    assert to_json_text(serial) == to_json_text(parallel)


def test_thread_cap_env(monkeypatch):
    monkeypatch.setenv("MSFEEC_THREADS", "3")
    assert thread_cap() == 3
    monkeypatch.setenv("MSFEEC_THREADS", "junk")
    assert thread_cap() == 1


def test_mesh_override_restricts_cases():
    out = run_suite("ldgh-equal-order", mesh=M.square_mesh(2))
    assert set(out) == {"n2/cells8/k0", "n2/cells8/k1", "n2/cells8/k2"}
    assert all(r.passed for r in out.values())


def test_newton_history_grading():
    good = newton_history_report([1.0, 1e-2, 1e-4 * 2, 1e-8, 1e-16], "x")
    assert good.passed
    linear = newton_history_report([1.0, 0.5, 0.25, 0.125, 0.0625, 1e-16], "x")
    assert not linear.passed
    short = newton_history_report([1.0, 1e-16], "x")
    assert not short.passed
