"""Singleton cache subtypes: what ``(d, X) < Y`` does for each ``type`` value.

Every handler is a function ``put_fn(d, X, Y, algebra) -> Cache`` giving the
new contents of ``(d, X)`` after ``Y`` is put into it.  Handlers never raise
into the interpreter; :meth:`CacheAlgebra.put` turns exceptions into error
data, and handlers report expected problems as error data themselves.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .cache import Cache, CacheAlgebra, Pair, ZERO
from .data import Datum

__all__ = [
    "SubtypeHandler",
    "SubtypeRegistry",
    "default_registry",
    "storage_put",
    "counter_put",
    "lines_put",
    "stat_put",
]

PutFn = Callable[[Datum, Cache, Cache, CacheAlgebra], Cache]


@dataclass(frozen=True)
class SubtypeHandler:
    type_name: str
    put_fn: PutFn
    is_pipe: bool = False
    # the shell passes a leading datum word to these as part of ``d``
    takes_flag: bool = False
    doc: str = ""


def flag_of(d: Datum) -> Datum:
    """The options a shell command was given: its datum minus ``type``."""
    return d.without("type")


# -- storage and counting ------------------------------------------------------

def storage_put(d: Datum, x: Cache, y: Cache, alg: CacheAlgebra) -> Cache:
    return alg.join(x, y)


def counter_put(d: Datum, x: Cache, y: Cache, alg: CacheAlgebra) -> Cache:
    return alg.singleton({"count": len(y)})


# -- text ----------------------------------------------------------------------

def lines_put(d: Datum, x: Cache, y: Cache, alg: CacheAlgebra) -> Cache:
    u = alg.universe
    out = []
    for p in y:
        text = p.datum.get("text")
        if not isinstance(text, str):
            continue
        for line in text.splitlines():
            out.append(Pair(u.fixed_point(Datum({"text": line})), ZERO))
    return alg.maximalize(out)


def split_put(d: Datum, x: Cache, y: Cache, alg: CacheAlgebra) -> Cache:
    sep = d.get("sep")
    u = alg.universe
    out = []
    for p in y:
        text = p.datum.get("text")
        if not isinstance(text, str):
            continue
        for part in (text.split(sep) if sep else text.split()):
            out.append(Pair(u.fixed_point(Datum({"text": part})), ZERO))
    return alg.maximalize(out)


def tr_put(d: Datum, x: Cache, y: Cache, alg: CacheAlgebra) -> Cache:
    """Re-type ``din`` values as ``dout`` data."""
    u = alg.universe
    din, dout = d.get("din"), d.get("dout")
    if din is None or dout is None:
        return alg.error("tr needs din: and dout: options")
    target = u.type(dout)
    source = u.types.get(din)
    out = []
    for p in y:
        if din not in p.datum:
            continue
        value = p.datum[din]
        raw = source.format(value) if source is not None else str(value)
        try:
            datum = u.fixed_point(Datum({dout: target.parse(raw)}))
        except (ValueError, TypeError) as exc:
            out.append(Pair(alg.error_datum(f"tr: cannot read {raw!r} as {dout}", exc), ZERO))
            continue
        out.append(Pair(datum, p.contents))
    return alg.maximalize(out)


# -- statistics ----------------------------------------------------------------

def stat_put(d: Datum, x: Cache, y: Cache, alg: CacheAlgebra) -> Cache:
    """Sum every abelian-group entry (restricted to ``d:`` targets if given)."""
    u = alg.universe
    targets = set(d.get("d", ()))
    totals: dict[str, object] = {}
    for p in y:
        for name, value in p.datum.items():
            t = u.types.get(name)
            if t is None or t.group_add is None:
                continue
            if targets and name not in targets:
                continue
            totals[name] = t.group_add(totals[name], value) if name in totals else value
    return alg.maximalize(Pair(Datum({k: v}), ZERO) for k, v in totals.items())


# -- filters -------------------------------------------------------------------

def _matches(alg: CacheAlgebra, datum: Datum, flag: Datum) -> bool:
    required = flag.get("d", ())
    if any(name not in datum for name in required):
        return False
    rest = flag.without("d")
    return alg.universe.leq(datum, rest)


def has_put(d: Datum, x: Cache, y: Cache, alg: CacheAlgebra) -> Cache:
    flag = flag_of(d)
    return alg.maximalize(p for p in y if _matches(alg, p.datum, flag))


def hasnt_put(d: Datum, x: Cache, y: Cache, alg: CacheAlgebra) -> Cache:
    flag = flag_of(d)
    return alg.maximalize(p for p in y if not _matches(alg, p.datum, flag))


def first_put(d: Datum, x: Cache, y: Cache, alg: CacheAlgebra) -> Cache:
    for p in y:
        if "error" not in p.datum and not alg.has_error(p.contents):
            return Cache([p])
    return ZERO


def ex_put(d: Datum, x: Cache, y: Cache, alg: CacheAlgebra) -> Cache:
    """Expand ``y`` together with its contents down to ``depth`` levels."""
    depth = d.get("depth", 2)
    level, parts = y, [y]
    for _ in range(depth - 1):
        level = alg.contents(level)
        if not level:
            break
        parts.append(level)
    return alg.join(*parts)


def ls_put(d: Datum, x: Cache, y: Cache, alg: CacheAlgebra) -> Cache:
    """List contents; elements with empty contents list as themselves.

    A bare ``(depth:n,0)`` element in ``y`` is taken as the listing depth.
    """
    depth = 1
    items = []
    for p in y:
        if not p.contents and set(p.datum) == {"depth"}:
            depth = p.datum["depth"]
        else:
            items.append(p)
    level = alg.maximalize(items)
    parts = []
    for _ in range(max(depth, 1)):
        nxt = []
        for p in level:
            if p.contents:
                nxt.extend(p.contents)
            else:
                parts.append(Cache([p]))
        level = alg.maximalize(nxt)
        if not level:
            break
    parts.append(level)
    return alg.join(*parts)


def _identity_pipe(d: Datum, x: Cache, y: Cache, alg: CacheAlgebra) -> Cache:
    return y


class LoggingHandler:
    """A put target that records everything put into it."""

    def __init__(self, sink: Callable[[str], None] | None = None):
        self.records: list[Cache] = []
        self._lock = threading.Lock()
        self._sink = sink

    def __call__(self, d: Datum, x: Cache, y: Cache, alg: CacheAlgebra) -> Cache:
        with self._lock:
            self.records.append(y)
            if self._sink is not None:
                self._sink(y.key)
            return alg.join(x, alg.singleton({"count": len(self.records)}))


def server_filter(allowed_types: Iterable[str] = ("storage",), max_elements: int = 10_000) -> PutFn:
    """The result filter applied by a server before replying."""
    allowed = frozenset(allowed_types)

    def put_fn(d: Datum, x: Cache, y: Cache, alg: CacheAlgebra) -> Cache:
        def clean(c: Cache, depth: int) -> list[Pair]:
            out = []
            for p in c:
                t = p.datum.get("type")
                if t is not None and t not in allowed:
                    continue
                out.append(Pair(p.datum, alg.maximalize(clean(p.contents, depth + 1))))
            return out

        kept = clean(y, 0)
        if len(kept) > max_elements:
            kept = sorted(kept, key=lambda p: p.key)[:max_elements]
            kept.append(Pair(alg.error_datum(f"server: result truncated to {max_elements} elements"), ZERO))
        return alg.maximalize(kept)

    return put_fn


# -- registry ------------------------------------------------------------------

@dataclass
class SubtypeRegistry:
    handlers: dict[str, SubtypeHandler] = field(default_factory=dict)
    default_type: str = "storage"

    def register(self, handler: SubtypeHandler, replace: bool = False) -> SubtypeHandler:
        if handler.type_name in self.handlers and not replace:
            raise ValueError(f"subtype {handler.type_name!r} already registered")
        self.handlers[handler.type_name] = handler
        return handler

    def add(self, type_name: str, put_fn: PutFn, *, is_pipe=False, takes_flag=False,
            replace=False, doc="") -> SubtypeHandler:
        return self.register(SubtypeHandler(type_name, put_fn, is_pipe, takes_flag, doc), replace)

    def __contains__(self, name: str) -> bool:
        return name in self.handlers

    def __getitem__(self, name: str) -> SubtypeHandler:
        return self.handlers[name]

    def dispatch(self, d: Datum) -> SubtypeHandler:
        name = d.get("type")
        if name is None:
            return self.handlers[self.default_type]
        handler = self.handlers.get(name)
        if handler is None:
            return _unknown_handler(name)
        return handler

    def copy(self) -> SubtypeRegistry:
        return SubtypeRegistry(dict(self.handlers), self.default_type)


def _unknown_handler(name: str) -> SubtypeHandler:
    def put_fn(d, x, y, alg):
        return alg.error(f"unknown subtype {name!r}")

    return SubtypeHandler(name, put_fn)


def default_registry() -> SubtypeRegistry:
    r = SubtypeRegistry()
    r.add("storage", storage_put, doc="X ∨ Y")
    r.add("counter", counter_put, is_pipe=True, doc="count the elements of Y")
    r.add("count", counter_put, is_pipe=True, doc="alias of counter")
    r.add("lines", lines_put, is_pipe=True, doc="one element per line of text")
    r.add("split", split_put, is_pipe=True, takes_flag=True, doc="split text on sep:")
    r.add("tr", tr_put, is_pipe=True, takes_flag=True, doc="translate din: data to dout:")
    r.add("stat", stat_put, is_pipe=True, takes_flag=True, doc="sum abelian-group data")
    r.add("has", has_put, is_pipe=True, takes_flag=True, doc="keep elements below the option")
    r.add("hasnt", hasnt_put, is_pipe=True, takes_flag=True, doc="drop elements below the option")
    r.add("first", first_put, is_pipe=True, doc="first element without error data")
    r.add("ex", ex_put, is_pipe=True, takes_flag=True, doc="expand to depth:")
    r.add("ls", ls_put, is_pipe=True, doc="list contents")
    r.add("cat", _identity_pipe, is_pipe=True, doc="pass Y through")
    r.add("log", LoggingHandler(), doc="record everything put into it")
    r.add("server", server_filter(), is_pipe=True, doc="server result filter")
    return r
