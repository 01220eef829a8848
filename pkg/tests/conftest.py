import pytest

# (criterion, status, detail) rows filled in by test_acceptance.py
ACCEPTANCE: list[tuple[int, str, str]] = []


@pytest.fixture
def acceptance():
    def record(criterion: int, passed: bool | None, detail: str) -> None:
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        ACCEPTANCE.append((criterion, status, detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {criterion:>2}: {status}  {detail}")
