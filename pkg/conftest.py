"""Shared criterion scoreboard.

Acceptance tests wrap their bodies in the `criterion` fixture's
context manager; the collected verdicts print as one line per
criterion in the terminal summary, where pytest's output capture
cannot hide them.
"""

import contextlib

import pytest

SCOREBOARD = pytest.StashKey()


@pytest.fixture
def criterion(request):
    @contextlib.contextmanager
    def record(tag, text):
        board = request.config.stash.setdefault(SCOREBOARD, [])
        try:
            yield
        except BaseException:
            board.append(f"{tag}: FAIL  {text}")
            raise
        board.append(f"{tag}: PASS  {text}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    board = config.stash.get(SCOREBOARD, [])
    if board:
        terminalreporter.section("acceptance criteria")
        for line in sorted(board):
            terminalreporter.write_line(line)
