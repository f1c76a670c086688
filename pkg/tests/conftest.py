import numpy as np
import pytest

_criteria = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    ids = getattr(report, "criterion_ids", None)
    if not ids:
        return
    for cid in ids:
        prev = _criteria.get(cid, True)
        _criteria[cid] = prev and report.passed


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    report.criterion_ids = [m.args[0] for m in item.iter_markers("criterion")]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_criteria, key=lambda c: int(c[1:])):
        terminalreporter.write_line(f"{cid}: {'PASS' if _criteria[cid] else 'FAIL'}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
