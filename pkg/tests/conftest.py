import pytest

_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def record():
    """Record one acceptance criterion outcome for the end-of-run summary."""

    def _record(cid: str, ok: bool, detail: str = "") -> bool:
        _RESULTS.append((cid, bool(ok), detail))
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, ok, detail in _RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {cid}: {detail}")
