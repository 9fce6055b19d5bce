import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request, capsys):
    """Record one PASS/FAIL line for an acceptance criterion.

    Usage: ``criterion(ok, detail)``; the line is echoed immediately and
    repeated in the terminal summary.
    """
    recorded = []

    def record(ok, detail=""):
        recorded.append((bool(ok), detail))

    yield record
    name = request.node.name
    for ok, detail in recorded:
        line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
