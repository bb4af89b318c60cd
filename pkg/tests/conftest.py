"""Collect one PASS/FAIL line per acceptance criterion for the terminal summary."""

import pytest

_OUTCOMES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not (report.when == "setup" and report.failed):
        return
    number, title = marker.args
    details = [value for key, value in item.user_properties if key == "detail"]
    _OUTCOMES[number] = (title, "PASS" if report.passed else "FAIL", details)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        title, status, details = _OUTCOMES[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}: {title}")
        for line in details:
            terminalreporter.write_line(f"    {line}")
