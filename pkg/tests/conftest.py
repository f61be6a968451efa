"""Collects acceptance outcomes and prints one line per criterion at the end."""

from collections import defaultdict

import pytest

_outcomes = defaultdict(list)
_titles = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            _titles[m.args[0]] = m.args[1]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    if m is None:
        return
    # the call phase decides; a skip or error during setup counts as well
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes[m.args[0]].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _titles:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_titles):
        states = _outcomes.get(number, [])
        if not states:
            verdict = "NOT RUN"
        elif "failed" in states:
            verdict = "FAIL"
        elif all(s == "skipped" for s in states):
            verdict = "SKIP"
        elif "skipped" in states:
            verdict = "PASS (parts skipped)"
        else:
            verdict = "PASS"
        tr.write_line(f"criterion {number:2d}: {verdict:<21s} {_titles[number]}")
