import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if name.startswith("test_criterion_") and (report.when == "call" or report.failed):
        _CRITERIA[int(name.split("_")[-1])] = report.passed and _CRITERIA.get(int(name.split("_")[-1]), True)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    from test_acceptance import TITLES
    terminalreporter.section("acceptance criteria")
    for i in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {i:2d} {'PASS' if _CRITERIA[i] else 'FAIL'}  {TITLES[i]}")
