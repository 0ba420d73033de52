"""Shared pytest plumbing.

The acceptance tests record one human-readable line per criterion; the
terminal-summary hook replays them at the end of the run so they are
visible even though pytest captures stdout.
"""

ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
