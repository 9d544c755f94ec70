import re

import pytest

from cdtriality import example_catalog

_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def catalog():
    return {k: example_catalog(k) for k in ("ex1", "ex2", "ex3", "ex4")}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    num = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if hasattr(report, "wasxfail"):
            outcome = "FAIL (known, see notes)" if report.skipped else "PASS (unexpected)"
        else:
            outcome = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1].split("[")[0]
        prev = _ACCEPTANCE.get(num, ("PASS", name))[0]
        if prev != "PASS":
            outcome = prev  # a failing variant decides the row
        _ACCEPTANCE[num] = (outcome, name)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        outcome, name = _ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {outcome:<24} {name}")
