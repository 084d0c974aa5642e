import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record(capsys):
    """Print one acceptance line immediately and keep it for the session summary."""

    def emit(criterion: str, passed: bool, detail: str):
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n    {line}")

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
