import pytest

_VERDICTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_VERDICTS] = {}


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion; returns the failed checks."""
    lines = request.config.stash[_VERDICTS]

    def record(number, checks):
        failed = [label for label, ok in checks if not ok]
        line = f"criterion {number}: {'FAIL' if failed else 'PASS'}"
        if failed:
            line += " (" + "; ".join(failed) + ")"
        lines[number] = line
        print(line)
        return failed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
