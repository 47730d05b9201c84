import pytest

# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def acceptance():
    def report(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
