from __future__ import annotations

import contextlib
import time

import pytest

_LINES: list[str] = []


@contextlib.contextmanager
def _criterion(number: int, title: str):
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        line = f"criterion {number:2d} FAIL  {title}  ({type(exc).__name__}: {str(exc)[:120]})"
        print(line)
        _LINES.append(line)
        raise
    line = f"criterion {number:2d} PASS  {title}  [{time.perf_counter() - start:.1f}s]"
    print(line)
    _LINES.append(line)


@pytest.fixture
def criterion():
    """``with criterion(n, title): ...`` records one pass/fail line."""
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES):
            terminalreporter.write_line(line)
