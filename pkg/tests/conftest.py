"""Prints one PASS/FAIL line per acceptance criterion after the run."""
import pytest

_outcomes: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    n, title = marker.args
    prev = _outcomes.get(n, ("PASS", title))[0]
    status = "PASS" if report.passed and prev == "PASS" else "FAIL"
    _outcomes[n] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        status, title = _outcomes[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {title}")
