"""Collects acceptance-criterion verdicts and prints them after the run."""

import pytest

RESULTS = {}


@pytest.fixture
def criterion():
    def record(number, title, passed, detail=""):
        RESULTS[number] = (title, bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        title, passed, detail = RESULTS[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{verdict}] criterion {number}: {title} | {detail}")
