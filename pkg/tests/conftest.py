import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def acceptance(request):
    """Record one ``PASS|FAIL|SKIP criterion: detail`` line, echoed in the terminal summary."""
    lines = request.config.stash[_LINES]

    def emit(criterion: str, status: str, detail: str) -> None:
        line = f"{status:<4} {criterion}: {detail}"
        print(line)
        lines.append(line)
    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
