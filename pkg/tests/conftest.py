import pytest

VERDICTS = []  # (criterion, passed, detail) recorded by the acceptance tests


@pytest.fixture
def verdict():
    def record(name, passed, detail=""):
        VERDICTS.append((name, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in VERDICTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}".rstrip())
