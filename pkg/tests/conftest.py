import pytest

# criterion number -> (passed, detail); filled by the acceptance tests
_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    """Record the outcome of one acceptance criterion for the terminal summary."""

    def record(number: int, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE[number] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
