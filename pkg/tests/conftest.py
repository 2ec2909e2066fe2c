import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Collect one pass/fail line per acceptance test for the run summary."""

    def _report(num: int, name: str, passed: bool, detail: str) -> None:
        mark = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"[{mark}] {num}. {name}: {detail}")

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
