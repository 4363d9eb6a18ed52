import pytest

# criterion id -> list of (check, passed, detail)
_ACCEPTANCE: dict = {}


class AcceptanceRecorder:
    def __call__(self, criterion: int, check: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE.setdefault(criterion, []).append((check, bool(passed), detail))
        return bool(passed)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE):
        checks = _ACCEPTANCE[crit]
        ok = all(p for _, p, _ in checks)
        tr.write_line(f"criterion {crit:>2}: {'PASS' if ok else 'FAIL'}")
        for check, passed, detail in checks:
            tr.write_line(f"    [{'pass' if passed else 'FAIL'}] {check}: {detail}")
