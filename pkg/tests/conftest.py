import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record and print one PASS/FAIL line per acceptance criterion, then assert it."""

    def _report(criterion: str, ok: bool, detail: str) -> None:
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
