import pytest

ACCEPTANCE: dict = {}


@pytest.fixture
def acceptance():
    """Recorder for the acceptance criteria: ``acceptance(n, name, ok, detail)``."""

    def record(number, name, ok, detail=""):
        ACCEPTANCE[number] = (name, bool(ok), detail)
        print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"{'PASS' if ok else 'FAIL'}  {number}. {name}  {detail}".rstrip())
