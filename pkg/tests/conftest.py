import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES: list = []


@pytest.fixture
def acceptance_line():
    """Record one pass/fail line per acceptance criterion; printed in the terminal summary."""
    def record(number: int, title: str, passed: bool, detail: str):
        ACCEPTANCE_LINES.append((number, f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"))
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
