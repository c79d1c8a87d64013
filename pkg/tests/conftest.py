import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def emit(name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capman.global_and_fixture_disabled():
            print("\n    " + line, flush=True)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
