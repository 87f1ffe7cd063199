"""Criterion scoreboard for standalone runs of this package's tests.

Mirrors the solver repository's root conftest so the plot smoke
criterion prints its verdict line here too; the separate stash key and
section title keep the two scoreboards apart when both load in one
session.
"""

import contextlib

import pytest

PLOT_SCOREBOARD = pytest.StashKey()


@pytest.fixture
def criterion(request):
    @contextlib.contextmanager
    def record(tag, text):
        board = request.config.stash.setdefault(PLOT_SCOREBOARD, [])
        try:
            yield
        except BaseException:
            board.append(f"{tag}: FAIL  {text}")
            raise
        board.append(f"{tag}: PASS  {text}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    board = config.stash.get(PLOT_SCOREBOARD, [])
    if board:
        terminalreporter.section("acceptance criteria (plots)")
        for line in sorted(board):
            terminalreporter.write_line(line)
