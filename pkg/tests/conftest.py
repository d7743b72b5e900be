import pytest

_LINES = []


@pytest.fixture
def criterion():
    """``record(k, name, ok, detail)`` stores one acceptance line and asserts ``ok``."""
    def record(k, name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {k:>2}: {name} ({detail})"
        _LINES.append((k, line))
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_LINES):
            terminalreporter.write_line(line)
