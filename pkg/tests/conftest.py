"""Shared test plumbing.

The acceptance suite records one verdict line per criterion through the
``record_criterion`` fixture; the lines are replayed after the run in a
dedicated terminal section so the pass/fail status of every criterion is
visible regardless of output capturing.
"""

import pytest

_CRITERIA = pytest.StashKey()


def pytest_configure(config):
    config.stash[_CRITERIA] = []


@pytest.fixture
def record_criterion(request):
    lines = request.config.stash[_CRITERIA]
    return lines.append


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash[_CRITERIA]
    if not lines:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
