import pytest

from ringsim.sim import SAFE, OpInterval, RegisterCell


@pytest.fixture
def cell():
    def make(initial=0, domain=8, writer=0, readers=(0, 1), semantics=SAFE, reg=0):
        return RegisterCell(reg, domain, initial, writer, frozenset(readers), semantics)
    return make


def iv(invoke, respond, op_id=0, kind="read"):
    return OpInterval(op_id, 0, 0, kind, None, invoke, respond)


# -- acceptance summary ------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record and print one pass/fail line for an acceptance criterion, then assert it."""
    def report(num: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"criterion {num}: {'PASS' if ok else 'FAIL'} - {title}" + (f" ({detail})" if detail else "")
        ACCEPTANCE[num] = line
        print(line)
        assert ok, line
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for num in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[num])
