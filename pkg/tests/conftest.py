"""Shared test hooks: collects acceptance-criterion outcomes and prints one
PASS/FAIL line per criterion after the run."""

import pytest

RESULTS: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def record_criterion():
    def record(num: int, name: str, passed: bool, detail: str) -> None:
        RESULTS.append((num, name, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not RESULTS:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance criteria", sep="=")
    for num, name, passed, detail in sorted(RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {num} {status} {name}: {detail}")
