"""The egg shell compilers: ``delta`` (text to data) and ``pi`` (text to caches).

Both are sequences of partial functions tried in order; the first row whose
pattern matches decides the result.  Scanning for separators only looks at
the top level of a string: characters inside ``(...)``, ``{...}`` and
double-quoted strings are skipped.

``pi`` evaluates as it compiles, so compiling ``cd x`` changes directory.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator

from ..cache import Cache, Pair, ZERO
from ..data import DataUniverse, Datum, UnknownType, _value_text

if TYPE_CHECKING:
    from .env import ShellEnv

__all__ = [
    "ParseError",
    "delta_compile",
    "pi_compile",
    "to_shell",
    "top_level",
    "strip_comment",
    "join_continuations",
]

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*\Z")
_BLANKS = " \t\r"


class ParseError(ValueError):
    def __init__(self, position: int, reason: str, text: str = ""):
        super().__init__(f"parse error at column {position + 1}: {reason}")
        self.position = position
        self.reason = reason
        self.text = text


def top_level(s: str) -> Iterator[tuple[int, str]]:
    """Yield ``(index, char)`` for characters outside brackets and quotes."""
    depth = 0
    quoted = False
    i = 0
    n = len(s)
    while i < n:
        c = s[i]
        if quoted:
            if c == "\\":
                i += 2
                continue
            if c == '"':
                quoted = False
        elif c == '"':
            quoted = True
        elif c in "({":
            depth += 1
        elif c in ")}":
            depth -= 1
        elif depth == 0:
            yield i, c
        i += 1


def _matching(s: str, start: int) -> int:
    """Index of the bracket closing the one at ``start``, or -1."""
    opening = s[start]
    closing = ")" if opening == "(" else "}"
    depth = 0
    quoted = False
    i = start
    while i < len(s):
        c = s[i]
        if quoted:
            if c == "\\":
                i += 2
                continue
            if c == '"':
                quoted = False
        elif c == '"':
            quoted = True
        elif c in "({":
            depth += 1
        elif c in ")}":
            depth -= 1
            if depth == 0:
                return i if c == closing else -1
        i += 1
    return -1


def _balanced(s: str) -> bool:
    depth = 0
    quoted = False
    i = 0
    while i < len(s):
        c = s[i]
        if quoted:
            if c == "\\":
                i += 2
                continue
            if c == '"':
                quoted = False
        elif c == '"':
            quoted = True
        elif c in "({":
            depth += 1
        elif c in ")}":
            depth -= 1
            if depth < 0:
                return False
        i += 1
    return depth == 0 and not quoted


def _unquote(text: str, off: int) -> str:
    if len(text) >= 2 and text[0] == '"' and text[-1] == '"':
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(off, f"bad quoted string {text!r}") from exc
    return text


def _is_quoted_word(s: str) -> bool:
    if not s.startswith('"'):
        return False
    i = 1
    while i < len(s):
        if s[i] == "\\":
            i += 2
            continue
        if s[i] == '"':
            return i == len(s) - 1
        i += 1
    return False


def _typed_segment(seg: str) -> bool:
    seg = seg.strip(_BLANKS)
    return seg.startswith("{") or any(c == ":" for _, c in top_level(seg))


# -- delta -------------------------------------------------------------------

def delta_compile(s: str, universe: DataUniverse, off: int = 0) -> Datum:
    """Compile a data term, returning the fixed point of the result."""
    return universe.fixed_point(_delta(s, universe, off))


def _delta(s: str, u: DataUniverse, off: int) -> Datum:
    # left blank / right blank
    if s[:1] and s[0] in _BLANKS + "\n":
        return _delta(s[1:], u, off + 1)
    if s[-1:] and s[-1] in _BLANKS + "\n":
        return _delta(s[:-1], u, off)
    if not _balanced(s):
        raise ParseError(off, f"unbalanced brackets or quotes in {s!r}", s)
    # comma: x,y where y starts another typed term
    commas = [i for i, c in top_level(s) if c == ","]
    for k, i in enumerate(commas):
        end = commas[k + 1] if k + 1 < len(commas) else len(s)
        if _typed_segment(s[i + 1:end]):
            left = _delta(s[:i], u, off)
            right = _delta(s[i + 1:], u, off + i + 1)
            return u.raw_meet(left, right)
    # curly
    if s.startswith("{") and _matching(s, 0) == len(s) - 1:
        return _delta(s[1:-1], u, off + 1)
    # curly2: x{y}
    if s.endswith("}"):
        k = _open_of_last(s)
        head = s[:k]
        if k > 0 and not any(c in ":{}" for _, c in top_level(head)):
            return u.raw_meet(_name_datum(_unquote(head, off), u, off), _delta(s[k + 1:-1], u, off + k + 1))
    # datum: x:y
    for i, c in top_level(s):
        if c == ":":
            return _datum_row(s[:i], s[i + 1:], u, off, off + i + 1)
    # maximum
    if s == "":
        return Datum()
    # bare word
    if _is_quoted_word(s):
        return _name_datum(_unquote(s, off), u, off)
    bad = next((c for c in s if c in ':{},"' or c.isspace()), None)
    if bad is not None:
        raise ParseError(off + s.index(bad), f"unexpected {bad!r} in data term {s!r}", s)
    return _name_datum(s, u, off)


def _open_of_last(s: str) -> int:
    """Index of the '{' matching a final '}', or -1."""
    depth = 0
    quoted = False
    i = len(s) - 1
    while i >= 0:
        c = s[i]
        if c == '"' and (i == 0 or s[i - 1] != "\\"):
            quoted = not quoted
        elif not quoted:
            if c == "}":
                depth += 1
            elif c == "{":
                depth -= 1
                if depth == 0:
                    return i
        i -= 1
    return -1


def _name_datum(word: str, u: DataUniverse, off: int) -> Datum:
    try:
        return Datum({"name": u.parse_value("name", word)})
    except UnknownType as exc:
        raise ParseError(off, str(exc), word) from exc


def _datum_row(type_text: str, value_text: str, u: DataUniverse, off: int, voff: int) -> Datum:
    type_name = type_text.strip(_BLANKS)
    if not _IDENT.match(type_name):
        raise ParseError(off, f"bad data type name {type_name!r}", type_text)
    if type_name not in u.types:
        raise ParseError(off, f"unknown data type {type_name!r}", type_text)
    raw = value_text.strip(_BLANKS)
    if raw.startswith('"'):
        raw = _unquote(raw, voff)
    elif any(c in raw for c in '{}"'):
        raise ParseError(voff, f"bad value {raw!r} for {type_name}", value_text)
    try:
        value = u.parse_value(type_name, raw)
    except (ValueError, TypeError) as exc:
        raise ParseError(voff, f"bad value {raw!r} for {type_name}: {exc}", value_text) from exc
    return Datum({type_name: value})


# -- pi ----------------------------------------------------------------------

def pi_compile(s: str, env: ShellEnv, off: int = 0) -> Cache:
    return _Pi(env).compile(s, off)


@dataclass
class _Pi:
    env: ShellEnv

    @property
    def alg(self):
        return self.env.algebra

    def compile(self, s: str, off: int) -> Cache:
        # empty: blank text denotes the empty cache
        if s.strip(_BLANKS + "\n") == "":
            return ZERO
        # lines: leftmost newline
        for i, c in top_level(s):
            if c == "\n":
                return self.alg.join(self.compile(s[:i], off), self.compile(s[i + 1:], off + i + 1))
        # left blank / right blank
        if s[0] in _BLANKS:
            return self.compile(s[1:], off + 1)
        if s[-1] in _BLANKS:
            return self.compile(s[:-1], off)
        if not _balanced(s):
            raise ParseError(off, f"unbalanced brackets or quotes in {s!r}", s)
        # shell command: C x
        word_end = next((i for i, c in top_level(s) if c in _BLANKS), len(s))
        word = s[:word_end]
        if word in self.env.commands:
            return self._command(word, s[word_end:], off + word_end)
        # put: x < y, grouped to the right
        for i, c in top_level(s):
            if c == "<":
                target = s[:i].strip(_BLANKS)
                result = self.alg.put(self.compile(s[:i], off), self.compile(s[i + 1:], off + i + 1))
                self.env.rebind(target, result)
                return result
        # lub: x y, leftmost
        for i, c in top_level(s):
            if c in _BLANKS:
                return self.alg.join(self.compile(s[:i], off), self.compile(s[i + 1:], off + i + 1))
        # parenthesis
        if s.startswith("(") and _matching(s, 0) == len(s) - 1:
            return self.compile(s[1:-1], off + 1)
        # slashes: x/d or x//d, rightmost
        slash = max((i for i, c in top_level(s) if c == "/"), default=-1)
        if slash >= 0:
            d = delta_compile(s[slash + 1:], self.env.universe, off + slash + 1)
            if slash > 0 and s[slash - 1] == "/":
                return self.alg.deep_select(self.compile(s[:slash - 1], off), d)
            return self.alg.select(self.compile(s[:slash], off), d)
        # references
        if s == ".":
            return self.env.dot
        if s == "~":
            return self.env.tilde
        if s == "@":
            return self.env.at
        # singleton
        if s.startswith("("):
            raise ParseError(off, f"unbalanced parenthesis in {s!r}", s)
        d = delta_compile(s, self.env.universe, off)
        return self.alg.maximalize([Pair(d, ZERO)])

    def _command(self, name: str, rest: str, off: int) -> Cache:
        cmd = self.env.commands[name]
        handler = self.env.registry.dispatch(cmd.elements[0].datum) if cmd.elements else None
        if handler is not None and handler.takes_flag:
            flag, rest, off = self._flag(rest, off)
            if flag is not None:
                u = self.env.universe
                p = cmd.elements[0]
                d = u.meet(p.datum, flag)
                if not u.in_D(d):
                    raise ParseError(off, f"option conflicts with command {name!r}", rest)
                cmd = Cache([Pair(d, p.contents)])
        y = self.compile(rest, off)
        return self.alg.contents(self.alg.put(cmd, y))

    def _flag(self, rest: str, off: int):
        stripped = rest.lstrip(_BLANKS)
        off += len(rest) - len(stripped)
        end = next((i for i, c in top_level(stripped) if c in _BLANKS + "\n"), len(stripped))
        token = stripped[:end]
        if (
            not token
            or token in self.env.commands
            or not _typed_segment(token)
            or any(c in "/<(" for _, c in top_level(token))
        ):
            return None, rest, off - (len(rest) - len(stripped))
        return delta_compile(token, self.env.universe, off), stripped[end:], off + end


# -- rendering back to shell text -------------------------------------------

def _datum_shell(d: Datum, u: DataUniverse, reserved) -> str:
    if set(d) == {"name"}:
        text = _value_text(u, "name", d["name"])
        return json.dumps(text) if text in reserved or text in ".~@" else text
    return "{" + ",".join(f"{k}:{_value_text(u, k, v)}" for k, v in d.items()) + "}"


def to_shell(c: Cache, universe: DataUniverse, reserved=()) -> str:
    """Shell text that compiles back to ``c`` (contents are written as puts).

    ``universe`` should be one whose extensions add nothing to ``c``'s data;
    names in ``reserved`` (command names) are quoted.
    """
    if not c:
        return ""
    terms = []
    for p in c:
        t = _datum_shell(p.datum, universe, reserved)
        if p.contents:
            t = f"({t} < ({to_shell(p.contents, universe, reserved)}))"
        terms.append(t)
    return " ".join(terms)


# -- text files --------------------------------------------------------------

def strip_comment(line: str) -> str:
    quoted = False
    i = 0
    while i < len(line):
        c = line[i]
        if quoted:
            if c == "\\":
                i += 2
                continue
            if c == '"':
                quoted = False
        elif c == '"':
            quoted = True
        elif c == "#":
            return line[:i]
        i += 1
    return line


def join_continuations(text: str) -> list[tuple[int, str]]:
    """Logical lines as ``(first physical line number, text)``.

    Comments are removed and a trailing backslash joins the next line.
    """
    out: list[tuple[int, str]] = []
    pending = ""
    start = 0
    for number, raw in enumerate(text.splitlines(), start=1):
        line = strip_comment(raw).rstrip()
        if not pending:
            start = number
        if line.endswith("\\"):
            pending += line[:-1] + " "
            continue
        out.append((start, pending + line))
        pending = ""
    if pending:
        out.append((start, pending))
    return out
