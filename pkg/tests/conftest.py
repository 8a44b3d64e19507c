import os

import numpy as np
import pytest

# keep solver timings and results independent of the host thread count
os.environ.setdefault("OMP_NUM_THREADS", "1")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- acceptance summary: one PASS/FAIL line per criterion --------------------------

_criteria: dict = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rpartition("::")[2]
    if "test_acceptance" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    num = int(name.split("_")[2])
    if report.when == "call" or report.failed or report.skipped:
        outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        prev = _criteria.get(num)
        if prev is None or prev[0] == "PASS":
            notes = "; ".join(str(v) for k, v in report.user_properties if k == "measured")
            _criteria[num] = (outcome, notes)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        outcome, notes = _criteria[num]
        line = f"criterion {num}: {outcome}"
        terminalreporter.write_line(line + (f"  ({notes})" if notes else ""))
