import pytest

# ---------------------------------------------------------------------------
#  Acceptance verdicts
# ---------------------------------------------------------------------------

_VERDICTS: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def verdict():
    """Record and print one acceptance check: ``verdict(criterion, part, ok, detail)``."""

    def record(criterion: int, part: str, ok: bool, detail: str) -> bool:
        _VERDICTS.setdefault(criterion, []).append((part, bool(ok), detail))
        print(f"ACCEPTANCE {criterion:2d} [{part}]: {'PASS' if ok else 'FAIL'}  {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(_VERDICTS):
        parts = _VERDICTS[c]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{p} {'PASS' if ok else 'FAIL'} ({d})" for p, ok, d in parts)
        terminalreporter.write_line(f"criterion {c:2d}: {status}  {detail}")
