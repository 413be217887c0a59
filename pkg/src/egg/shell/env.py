"""The shell environment: commands, the ``. ~ @`` references, hatches, scripts."""
from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .. import localfs
from ..cache import Cache, CacheAlgebra, Pair, ZERO
from ..data import DataError, DataUniverse, Datum, _value_text, default_universe
from ..subtypes import SubtypeRegistry, default_registry, flag_of
from .parser import ParseError, join_continuations, pi_compile

__all__ = ["ShellEnv", "format_display", "BUILTIN_COMMANDS"]

# command name -> subtype it is a singleton of
BUILTIN_COMMANDS = {
    "ls": "ls",
    "cd": "cd",
    "pwd": "pwd",
    "show": "show",
    "save": "save",
    "count": "counter",
    "lines": "lines",
    "split": "split",
    "tr": "tr",
    "stat": "stat",
    "has": "has",
    "hasnt": "hasnt",
    "first": "first",
    "ex": "ex",
    "test": "test",
    "cat": "cat",
    "hatch": "hatch",
    "log": "log",
}

MAX_SHOWN = 72


def format_display(c: Cache, fields: Iterable[str] = (), universe: DataUniverse | None = None) -> str:
    """One line per element: its datum, limited to ``fields`` when given."""
    universe = universe or default_universe()
    fields = list(fields)
    out = []
    for p in c:
        d = p.datum
        if "error" in d:
            out.append("error:" + _short(_value_text(universe, "error", d["error"])))
            continue
        shown = [k for k in fields if k in d] if fields else []
        if shown:
            out.append(" ".join(f"{k}:{_short(_value_text(universe, k, d[k]))}" for k in shown))
        else:
            g = universe.generators(d)
            if len(g) == 1 and "name" in g:
                out.append(g.text(universe))
            else:
                out.append(" ".join(f"{k}:{_short(_value_text(universe, k, v))}" for k, v in g.items()) or "{}")
    return "\n".join(out)


def _short(text: str) -> str:
    return text if len(text) <= MAX_SHOWN else text[: MAX_SHOWN - 1] + "…"


@dataclass(eq=False)
class ShellEnv:
    universe: DataUniverse
    registry: SubtypeRegistry
    commands: dict[str, Cache] = field(default_factory=dict)
    dot: Cache = ZERO
    tilde: Cache = ZERO
    display_fields: list[str] = field(default_factory=list)
    rolodex: object = None
    tilde_dir: Path | None = None
    out: Callable[[str], None] = print
    last: Cache = ZERO

    def __post_init__(self):
        self.algebra = CacheAlgebra(self.universe, self.registry)
        self._at: Cache | None = None
        self._bind_handlers()
        self.interpreter = Cache([Pair(Datum({"type": "interpreter"}), ZERO)])

    # -- construction -----------------------------------------------------
    @classmethod
    def create(
        cls,
        tilde_dir: str | os.PathLike | None = None,
        rolodex=None,
        plugins: Iterable[str | os.PathLike] = (),
        universe: DataUniverse | None = None,
        registry: SubtypeRegistry | None = None,
        out: Callable[[str], None] = print,
    ) -> ShellEnv:
        env = cls(universe or default_universe(), registry or default_registry(), out=out)
        env.rolodex = rolodex
        for name, subtype in BUILTIN_COMMANDS.items():
            env.add_command(name, subtype)
        for plugin in plugins:
            from ..plugins import load_plugin

            load_plugin(plugin, env)
        if tilde_dir is not None:
            env.tilde_dir = Path(tilde_dir)
            env.tilde = localfs.tree(env.algebra, env.tilde_dir)
        else:
            env.tilde = env.algebra.singleton({"name": "~"})
        env.dot = env.restore_saved() or env.tilde
        return env

    def add_command(self, name: str, subtype: str | None = None, contents: Cache = ZERO) -> Cache:
        cmd = Cache([Pair(Datum({"type": subtype or name}), contents)])
        self.commands[name] = cmd
        return cmd

    def child(self) -> ShellEnv:
        """A scratch environment sharing data and references with this one."""
        kid = ShellEnv(self.universe, self.registry.copy(), dict(self.commands), self.dot, self.tilde,
                       list(self.display_fields), self.rolodex, self.tilde_dir, self.out)
        kid._at = self._at
        return kid

    def _bind_handlers(self) -> None:
        r = self.registry
        r.add("cd", self._cd_put, is_pipe=True, replace=True, doc="change the current cache")
        r.add("pwd", self._pwd_put, is_pipe=True, replace=True, doc="the current cache")
        r.add("show", self._show_put, is_pipe=True, takes_flag=True, replace=True, doc="set display fields")
        r.add("save", self._save_put, is_pipe=True, replace=True, doc="persist the current cache")
        r.add("test", self._test_put, is_pipe=True, replace=True, doc="resolve sources, errors as data")
        r.add("hatch", self._hatch_put, is_pipe=True, replace=True, doc="read hatch files as caches")
        r.add("interpreter", self._interpreter_put, is_pipe=True, replace=True)

    # -- references -------------------------------------------------------
    @property
    def at(self) -> Cache:
        if self._at is None:
            self._at = ZERO  # guards home expressions that mention @
            self._at = self._build_at()
        return self._at

    def _build_at(self) -> Cache:
        if self.rolodex is None:
            return self.algebra.singleton({"name": "@"})
        from ..net.rolodex import resolve_home

        homes = []
        for name in self.rolodex.names():
            home = resolve_home(name, self.rolodex, self)
            contents = self.algebra.contents(home) if not self.algebra.has_error(home) else home
            homes.append(Pair(self.universe.datum(name=name, person=name), contents))
        return self.algebra.singleton({"name": "@"}, self.algebra.maximalize(homes))

    def refresh_at(self) -> None:
        self._at = None

    def rebind(self, target: str, value: Cache) -> None:
        if target == ".":
            self.dot = value
        elif target == "~":
            self.tilde = value

    # -- evaluation -------------------------------------------------------
    def compile(self, line: str) -> Cache:
        try:
            return pi_compile(line, self)
        except (DataError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            return self.algebra.error(str(exc), exc)

    def execute_line(self, line: str) -> Cache:
        """Compile ``line`` and route the value through the interpreter."""
        value = self.compile(line)
        self.algebra.put(self.interpreter, value)
        return self.last

    def display(self, c: Cache) -> str:
        return format_display(c, self.display_fields, self.universe)

    def load_hatch(self, path: str | os.PathLike) -> Cache:
        """Interpret a file of shell lines as the contents of a cache."""
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            return self.algebra.error(f"cannot read hatch {path}", exc)
        kid = self.child()
        kid.display_fields = []
        results = []
        for lineno, line in join_continuations(text):
            if not line.strip():
                continue
            try:
                results.append(kid.compile(line))
            except ParseError as exc:
                results.append(self.algebra.error(f"{path}:{lineno}: {exc}", exc))
        if kid.display_fields:
            self.display_fields = list(kid.display_fields)
        return self.algebra.join(*results)

    def run_script(self, path: str | os.PathLike, err: Callable[[str], None] | None = None) -> int:
        """Execute a file line by line; nonzero when any line fails."""
        err = err or (lambda msg: print(msg, file=sys.stderr))
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            err(f"{path}: {exc}")
            return 2
        status = 0
        for lineno, line in join_continuations(text):
            if not line.strip():
                continue
            try:
                result = self.execute_line(line)
            except ParseError as exc:
                err(f"{path}:{lineno}: {exc}")
                status = 1
                continue
            if result:
                self.out(self.display(result))
            if self.algebra.has_error(result):
                status = 1
        return status

    # -- persistence ------------------------------------------------------
    def _saved_path(self) -> Path | None:
        return None if self.tilde_dir is None else self.tilde_dir / ".egg" / "dot.cache"

    def save(self) -> Path:
        from ..net.wire import serialize

        path = self._saved_path()
        if path is None:
            raise OSError("no home directory to save into")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(serialize(self.dot))
        return path

    def restore_saved(self) -> Cache | None:
        path = self._saved_path()
        if path is None or not path.exists():
            return None
        from ..net.wire import deserialize

        return deserialize(path.read_bytes(), self.algebra)

    # -- bound handlers ---------------------------------------------------
    def _is_hatch(self, d: Datum) -> bool:
        return d.get("ext") == "hatch" and "path" in d

    def _open_hatches(self, y: Cache) -> Cache:
        pairs = []
        for p in y:
            if self._is_hatch(p.datum):
                pairs.append(Pair(p.datum, self.load_hatch(p.datum["path"])))
            else:
                pairs.append(p)
        return self.algebra.maximalize(pairs)

    def _cd_put(self, d, x, y, alg):
        self.dot = self._open_hatches(y) if y else self.tilde
        return ZERO

    def _pwd_put(self, d, x, y, alg):
        return alg.maximalize(Pair(p.datum, ZERO) for p in self.dot)

    def _show_put(self, d, x, y, alg):
        self.display_fields = list(flag_of(d).get("d", ()))
        return ZERO

    def _save_put(self, d, x, y, alg):
        path = self.save()
        return alg.singleton({"path": str(path)})

    def _test_put(self, d, x, y, alg):
        parts = []
        for p in y:
            if "path" in p.datum and not p.contents:
                parts.append(localfs.tree(alg, p.datum["path"]))
            else:
                parts.append(Cache([p]))
        return alg.join(*parts)

    def _hatch_put(self, d, x, y, alg):
        return self._open_hatches(y)

    def _interpreter_put(self, d, x, y, alg):
        self.last = y
        return y
