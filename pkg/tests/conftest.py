import pytest

GATE = {}


@pytest.fixture
def gate():
    """Record one acceptance verdict: ``gate(number, ok, detail)``."""

    def record(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        GATE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not GATE:
        return
    terminalreporter.section("acceptance gate")
    for number in sorted(GATE):
        terminalreporter.write_line(GATE[number])
