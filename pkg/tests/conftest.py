"""Shared fixtures and the acceptance-criterion reporting hook.

Acceptance tests record one line per criterion through the ``criterion``
fixture; the lines are replayed in the terminal summary so the verdicts are
visible even when every test passes.
"""

import pytest

_CRITERION_LINES: list[tuple[int, str]] = []


@pytest.fixture
def criterion():
    """Record a pass/fail line for one acceptance criterion."""

    def _record(num: int, passed: bool, detail: str) -> None:
        verdict = "PASS" if passed else "FAIL"
        _CRITERION_LINES.append((num, f"[criterion {num:2d}] {verdict}  {detail}"))

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_LINES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for _, line in sorted(_CRITERION_LINES):
        terminalreporter.write_line(line)
