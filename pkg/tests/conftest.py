import pytest

from ribc.verify import Check

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    def record(number: int, check: Check, budget: float):
        ok = check.passed and check.seconds < budget
        ACCEPTANCE_LINES.append(
            f"{'PASS' if ok else 'FAIL'}  criterion {number:2d}  {check.name:<24s}"
            f"{check.seconds:7.2f}s / {budget:g}s budget"
        )
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
