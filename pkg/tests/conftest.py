import pytest

RESULTS: dict[int, str] = {}


@pytest.fixture
def record():
    """Log one acceptance line per criterion and return the verdict."""

    def _record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        RESULTS[number] = line
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
