"""Interactive read-eval-print loop."""
from __future__ import annotations

import sys
from typing import Callable, TextIO

from .env import ShellEnv
from .parser import ParseError, strip_comment

PROMPT = "egg> "
MORE = "...> "


def repl(env: ShellEnv, stdin: TextIO | None = None, write: Callable[[str], None] | None = None) -> int:
    """Run until end of input; returns the number of lines that failed."""
    interactive = stdin is None and sys.stdin.isatty()
    stdin = stdin or sys.stdin
    write = write or (lambda s: print(s, flush=True))
    if interactive:
        try:
            import readline  # noqa: F401  (line editing)
        except ImportError:
            pass
    failures = 0
    pending = ""
    while True:
        if interactive:
            try:
                raw = input(MORE if pending else PROMPT)
            except EOFError:
                write("")
                break
            except KeyboardInterrupt:
                write("")
                pending = ""
                continue
        else:
            raw = stdin.readline()
            if not raw:
                break
            raw = raw.rstrip("\n")
        line = strip_comment(raw).rstrip()
        if line.endswith("\\"):
            pending += line[:-1] + " "
            continue
        line, pending = pending + line, ""
        if not line.strip():
            continue
        try:
            result = env.execute_line(line)
        except ParseError as exc:
            write(f"{' ' * (len(PROMPT) + exc.position)}^\n{exc}" if interactive else str(exc))
            failures += 1
            continue
        if env.algebra.has_error(result):
            failures += 1
        if result:
            write(env.display(result))
    return failures
