"""Collects acceptance outcomes and prints one line per criterion."""

import pytest

_OUTCOMES: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(item.user_properties).get("detail", "")
        _OUTCOMES[n] = {"passed": report.passed, "detail": detail, "name": item.name}


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        o = _OUTCOMES[n]
        status = "PASS" if o["passed"] else "FAIL"
        tr.write_line(f"criterion {n:2d}: {status}  {o['name']}  {o['detail']}")
