"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
import pytest

RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    def record(n: int, ok: bool, detail: str) -> bool:
        RESULTS[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
