import pytest

_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for the terminal summary; returns the flag for asserting."""
    def record(number: int, passed: bool, detail: str) -> bool:
        _LINES.append(f"criterion {number:>2d}: {'PASS' if passed else 'FAIL'}  {detail}")
        print(_LINES[-1])
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
