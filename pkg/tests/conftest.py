import re

import pytest

_ACCEPTANCE_LINES = []


def _order(label):
    num, rest = re.match(r"(\d+)(.*)", str(label)).groups()
    return int(num), rest


@pytest.fixture(scope="session")
def report_line():
    """Record one summary line per criterion (``number`` may carry a letter
    suffix for sub-checks); all lines are printed at the end of the run."""
    def record(number, ok, detail):
        line = f"criterion {str(number):>3}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append((_order(number), line))
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
