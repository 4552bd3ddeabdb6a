import pytest

VERDICTS: list[str] = []


@pytest.fixture
def verdict(request):
    """Record a PASS/FAIL line for an acceptance criterion."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def record(criterion: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}"
        VERDICTS.append(line)
        with capman.global_and_fixture_disabled():
            print(f"\n{line}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
