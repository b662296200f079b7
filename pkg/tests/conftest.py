"""Shared pytest plumbing.

The acceptance suite reports one verdict line per criterion.  Prints from
passing tests are normally swallowed by capture, so the lines are also
collected here and replayed in the terminal summary, where they survive
any -q/-v combination.
"""

from __future__ import annotations

import pytest

_verdicts: list[str] = []


@pytest.fixture(scope="session")
def verdicts() -> list[str]:
    """Append one formatted PASS/FAIL line per acceptance criterion."""
    return _verdicts


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    if _verdicts:
        terminalreporter.section("acceptance checklist")
        for line in _verdicts:
            terminalreporter.write_line(line)
