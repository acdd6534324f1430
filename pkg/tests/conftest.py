import pytest

# criterion id -> list of (status, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict = {}


def record(criterion: str, ok: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(criterion, []).append(("PASS" if ok else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE, key=lambda c: (int(c.split(".")[0]), c)):
        parts = ACCEPTANCE[crit]
        status = "PASS" if all(s == "PASS" for s, _ in parts) else "FAIL"
        tr.write_line(f"{status}  criterion {crit}: " + " | ".join(d for _, d in parts))


@pytest.fixture
def accept():
    return record
