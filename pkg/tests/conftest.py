import pytest

_RESULTS = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion; lines are echoed
    immediately and again in the terminal summary so they survive capture."""

    def record(number: int, title: str, passed: bool, detail: str = ""):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {title}" + (f" ({detail})" if detail else "")
        _RESULTS.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_RESULTS):
        terminalreporter.write_line(line)
