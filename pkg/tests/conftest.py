"""Shared pytest plumbing for the acceptance suite.

The acceptance tests each emit a single verdict line.  Default capture
would swallow those on success, so a fixture records them and a terminal
summary hook echoes the full list at the end of the run.
"""
import pytest

_lines: list[str] = []


@pytest.fixture
def verdict():
    def emit(num: int, ok: bool, detail: str) -> None:
        line = f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'}: {detail}"
        _lines.append(line)
        print(line)
        assert ok, line

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in _lines:
            terminalreporter.write_line(line)
