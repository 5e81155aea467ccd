"""Prints one PASS/FAIL line per acceptance criterion at the end of the run."""
import pytest

_results = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call" and not (report.when == "setup" and report.failed):
        return
    label = marker.args[0] if marker.args else item.name
    _results.append((label, report.passed, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, seconds in sorted(_results, key=lambda r: int(r[0].split()[0])):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {label}  ({seconds:.2f} s)")
