"""The data universe: basic types, data, extensions and their fixed points.

A datum is a finite assignment of basic-type names to values.  Absent types
are "top", so the empty datum ``{}`` is the maximum.  Two data meet
componentwise and the result is driven to the fixed point of every registered
extension; that fixed point is the canonical representative.  A datum belongs
to the demoted poset (``in_D``) when none of its values is a type's bottom.
"""
from __future__ import annotations

import json
import os.path
import random
from dataclasses import dataclass, field
from fnmatch import fnmatchcase
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

__all__ = [
    "BOTTOM",
    "BasicType",
    "Datum",
    "DataError",
    "Extension",
    "DataUniverse",
    "NamePattern",
    "NonTerminatingExtension",
    "UnknownType",
    "default_universe",
    "format_value",
]


class DataError(Exception):
    """Base class for problems with data."""


class UnknownType(DataError, KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unknown data type {self.name!r}"


class NonTerminatingExtension(DataError):
    pass


class _Bottom:
    """The minimum adjoined to every basic type."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "BOTTOM"

    def __str__(self) -> str:
        return "⊥"

    def __reduce__(self):
        return (_Bottom, ())


BOTTOM = _Bottom()


@dataclass(frozen=True)
class BasicType:
    """A meet semilattice of values with a distinguished bottom.

    ``leq`` and ``meet`` only ever see non-bottom values; bottom handling is
    shared.  ``parse``/``format`` give the text form used in ``type:value``.
    """

    name: str
    leq_fn: Callable[[Any, Any], bool]
    meet_fn: Callable[[Any, Any], Any]
    parse: Callable[[str], Any] = str
    format: Callable[[Any], str] = str
    group_add: Callable[[Any, Any], Any] | None = None
    zero: Any = None
    bottom: Any = BOTTOM

    def leq(self, a, b) -> bool:
        if a is BOTTOM:
            return True
        if b is BOTTOM:
            return False
        return self.leq_fn(a, b)

    def meet(self, a, b):
        if a is BOTTOM or b is BOTTOM:
            return BOTTOM
        return self.meet_fn(a, b)


def _trivial_leq(a, b) -> bool:
    return a == b


def _trivial_meet(a, b):
    return a if a == b else BOTTOM


def trivial_type(name: str, parse=str, format=str, group_add=None, zero=None) -> BasicType:
    """Values compare only when equal; distinct values meet at bottom."""
    return BasicType(name, _trivial_leq, _trivial_meet, parse, format, group_add, zero)


def _parse_nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise ValueError(f"expected a non-negative integer, got {text!r}")
    return value


def _add(a, b):
    return a + b


def integer_type(name: str) -> BasicType:
    """Integers with their usual order; no integer is minimal."""
    return BasicType(name, lambda a, b: a <= b, min, int, str)


def prefix_type(name: str) -> BasicType:
    """Strings where ``a <= b`` iff ``b`` is a prefix of ``a``."""

    def meet(a: str, b: str):
        if a.startswith(b):
            return a
        if b.startswith(a):
            return b
        return BOTTOM

    return BasicType(name, lambda a, b: a.startswith(b), meet)


_WILDCARDS = "*?["


@dataclass(frozen=True, order=True)
class NamePattern:
    """A conjunction of glob patterns; matches names matching every part."""

    parts: tuple[str, ...]

    def matches(self, literal: str) -> bool:
        return all(fnmatchcase(literal, p) for p in self.parts)

    def __str__(self) -> str:
        return "&".join(self.parts)


def _name_parse(text: str):
    if any(c in text for c in _WILDCARDS):
        return NamePattern(tuple(sorted(set(text.split("&")))))
    return text


def _name_leq(a, b) -> bool:
    if isinstance(b, NamePattern):
        if isinstance(a, NamePattern):
            return set(b.parts) <= set(a.parts)
        return b.matches(a)
    return a == b


def _name_meet(a, b):
    if isinstance(a, NamePattern) and isinstance(b, NamePattern):
        return NamePattern(tuple(sorted(set(a.parts) | set(b.parts))))
    if isinstance(b, NamePattern):
        return a if b.matches(a) else BOTTOM
    if isinstance(a, NamePattern):
        return b if a.matches(b) else BOTTOM
    return a if a == b else BOTTOM


def name_type(name: str = "name") -> BasicType:
    """Literal names below the glob patterns that match them.

    Patterns are kept as formal conjunctions so that any two values have a
    greatest lower bound.
    """
    return BasicType(name, _name_leq, _name_meet, _name_parse, str)


def _fieldset_parse(text: str) -> tuple[str, ...]:
    return tuple(sorted({p.strip() for p in text.split(",") if p.strip()}))


def fieldset_type(name: str = "d") -> BasicType:
    """Sets of type names; more names is lower, meet is union."""
    return BasicType(
        name,
        lambda a, b: set(b) <= set(a),
        lambda a, b: tuple(sorted(set(a) | set(b))),
        _fieldset_parse,
        lambda v: ",".join(v),
    )


_SPECIAL = set(' \t\n,{}():<"/#\\')


def format_value(text: str) -> str:
    """Quote ``text`` when it would not survive the ``type:value`` syntax."""
    if text == "" or any(c in _SPECIAL for c in text):
        return json.dumps(text, ensure_ascii=False)
    return text


class Datum(Mapping[str, Any]):
    """An immutable, canonically ordered assignment of type names to values."""

    __slots__ = ("_entries", "_hash", "_text")

    def __init__(self, entries: Mapping[str, Any] | Iterable[tuple[str, Any]] = ()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        self._entries = tuple(sorted(dict(items).items(), key=lambda kv: kv[0]))
        self._hash = None
        self._text = None

    def __getitem__(self, key: str):
        for k, v in self._entries:
            if k == key:
                return v
        raise KeyError(key)

    def __iter__(self) -> Iterator[str]:
        return (k for k, _ in self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return self._entries

    def __eq__(self, other) -> bool:
        if isinstance(other, Datum):
            return self._entries == other._entries
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self._entries)
        return self._hash

    def with_entries(self, **updates) -> Datum:
        merged = dict(self._entries)
        merged.update(updates)
        return Datum(merged)

    def without(self, *names: str) -> Datum:
        return Datum((k, v) for k, v in self._entries if k not in names)

    def text(self, universe: DataUniverse | None = None) -> str:
        """The shell text form; a lone ``name`` entry prints as a bare word."""
        if self._text is None:
            self._text = _datum_text(self, universe)
        return self._text

    def __repr__(self) -> str:
        return f"Datum({self.text()})"


def _value_text(universe, type_name, value) -> str:
    if value is BOTTOM:
        return str(BOTTOM)
    if universe is not None and type_name in universe.types:
        raw = universe.types[type_name].format(value)
    elif isinstance(value, tuple):
        raw = ",".join(value)
    else:
        raw = str(value)
    if isinstance(value, (NamePattern, tuple)):
        return raw if not any(c in _SPECIAL - {","} for c in raw) else json.dumps(raw)
    return format_value(raw)


def _datum_text(d: Datum, universe) -> str:
    universe = universe or _DEFAULT
    if not d:
        return "{}"
    if len(d) == 1 and "name" in d:
        v = d["name"]
        word = _value_text(universe, "name", v)
        if ":" not in word and not word.startswith('"'):
            return word
    body = ",".join(f"{k}:{_value_text(universe, k, v)}" for k, v in d.items())
    return "{" + body + "}"


@dataclass(frozen=True)
class Extension:
    """A refinement ``F(s) = s ^ f(s)`` with ``f`` order preserving.

    ``refine`` is ``f``: it returns the extra data implied by its argument.
    """

    name: str
    refine: Callable[[Datum], Datum]


@dataclass
class DataUniverse:
    types: dict[str, BasicType] = field(default_factory=dict)
    extensions: dict[str, Extension] = field(default_factory=dict)
    max_iterations: int = 64

    def __post_init__(self):
        self._fixed: dict[Datum, Datum] = {}

    # -- registry ---------------------------------------------------------
    def add_type(self, t: BasicType) -> BasicType:
        if t.name in self.types:
            raise DataError(f"data type {t.name!r} already registered")
        self.types[t.name] = t
        self._fixed.clear()
        return t

    def add_extension(self, ext: Extension) -> Extension:
        if ext.name in self.extensions:
            raise DataError(f"extension {ext.name!r} already registered")
        self.extensions[ext.name] = ext
        self._fixed.clear()
        return ext

    def type(self, name: str) -> BasicType:
        try:
            return self.types[name]
        except KeyError:
            raise UnknownType(name) from None

    def copy(self) -> DataUniverse:
        return DataUniverse(dict(self.types), dict(self.extensions), self.max_iterations)

    # -- construction -----------------------------------------------------
    def datum(self, entries: Mapping[str, Any] | None = None, **kw) -> Datum:
        """Build a datum from python values (or text) and canonicalize it."""
        merged = dict(entries or {})
        merged.update(kw)
        values = {}
        for k, v in merged.items():
            t = self.type(k)
            values[k] = t.parse(v) if isinstance(v, str) and t.parse is not str else v
        return self.fixed_point(Datum(values))

    def parse_value(self, type_name: str, text: str):
        return self.type(type_name).parse(text)

    # -- order ------------------------------------------------------------
    def raw_meet(self, a: Datum, b: Datum) -> Datum:
        """Componentwise meet in the direct sum, without extensions."""
        if not a:
            return b
        if not b:
            return a
        out = dict(a.items())
        for k, v in b.items():
            if k in out:
                out[k] = self.type(k).meet(out[k], v)
            else:
                self.type(k)
                out[k] = v
        for k in a:
            self.type(k)
        return Datum(out)

    def meet(self, a: Datum, b: Datum) -> Datum:
        return self.fixed_point(self.raw_meet(a, b))

    def leq(self, a: Datum, b: Datum) -> bool:
        for k, v in b.items():
            if k not in a:
                return False
            if not self.type(k).leq(a[k], v):
                return False
        return True

    def in_D(self, d: Datum) -> bool:
        return all(v is not BOTTOM for _, v in d.items())

    # -- extensions -------------------------------------------------------
    def extend(self, ext: Extension, d: Datum) -> Datum:
        return self.raw_meet(d, ext.refine(d))

    def fixed_point(self, d: Datum, order: Sequence[str] | None = None) -> Datum:
        """Apply extensions until none changes ``d``.

        ``order`` fixes the sequence in which extensions are tried; the
        result does not depend on it.
        """
        if order is None:
            hit = self._fixed.get(d)
            if hit is not None:
                return hit
        exts = (
            list(self.extensions.values())
            if order is None
            else [self.extensions[n] for n in order]
        )
        current = d
        for _ in range(self.max_iterations):
            changed = False
            for ext in exts:
                nxt = self.extend(ext, current)
                if nxt != current:
                    current = nxt
                    changed = True
            if not changed:
                if order is None:
                    self._fixed[d] = current
                    self._fixed[current] = current
                return current
        raise NonTerminatingExtension(
            f"no fixed point for {d.text(self)} after {self.max_iterations} rounds"
        )

    def generators(self, d: Datum) -> Datum:
        """Drop entries the extensions would recompute from the others."""
        current = d
        for name in list(d):
            smaller = current.without(name)
            try:
                if self.fixed_point(smaller) == d:
                    current = smaller
            except NonTerminatingExtension:
                pass
        return current

    def is_fixed(self, d: Datum) -> bool:
        return all(self.extend(e, d) == d for e in self.extensions.values())

    # -- text -------------------------------------------------------------
    def text(self, d: Datum) -> str:
        return _datum_text(d, self)

    def random_datum(self, rng: random.Random, pools: Mapping[str, Sequence[Any]]) -> Datum:
        """A fixed-point datum with a random subset of entries from ``pools``."""
        keys = [k for k in pools if rng.random() < 0.5]
        return self.fixed_point(Datum({k: rng.choice(pools[k]) for k in keys}))


# -- bundled types and extensions ------------------------------------------

_STRING_TYPES = (
    "text", "ext", "path", "host", "person", "type", "sep", "din", "dout",
    "error", "errorbase", "traceback", "lang", "domain", "check", "op",
)

_LANGUAGES = {
    "py": "python", "c": "c", "h": "c", "cc": "c++", "cpp": "c++",
    "rs": "rust", "sh": "shell", "hatch": "egg", "md": "markdown", "txt": "text",
}


def _has_bottom(d: Datum, name: str) -> bool:
    return d.get(name) is BOTTOM


def _text_to_tstart(d: Datum) -> Datum:
    if "text" not in d:
        return Datum()
    return Datum({"tstart": d["text"]})


def _path_to_name(d: Datum) -> Datum:
    if "path" not in d:
        return Datum()
    if _has_bottom(d, "path"):
        return Datum({"name": BOTTOM})
    base = os.path.basename(d["path"].rstrip("/")) or d["path"]
    if any(c in base for c in _WILDCARDS):
        return Datum()
    return Datum({"name": base})


def _name_to_ext(d: Datum) -> Datum:
    v = d.get("name")
    if v is None or isinstance(v, NamePattern):
        return Datum()
    if v is BOTTOM:
        return Datum({"ext": BOTTOM})
    return Datum({"ext": os.path.splitext(v)[1][1:]})


def _ext_to_lang(d: Datum) -> Datum:
    v = d.get("ext")
    if v is BOTTOM:
        return Datum({"lang": BOTTOM})
    if v in _LANGUAGES:
        return Datum({"lang": _LANGUAGES[v]})
    return Datum()


def _host_to_domain(d: Datum) -> Datum:
    v = d.get("host")
    if v is None:
        return Datum()
    if v is BOTTOM:
        return Datum({"domain": BOTTOM})
    labels = v.split(".")
    return Datum({"domain": ".".join(labels[-2:])})


BUNDLED_EXTENSIONS = (
    Extension("text.tstart", _text_to_tstart),
    Extension("path.name", _path_to_name),
    Extension("name.ext", _name_to_ext),
    Extension("ext.lang", _ext_to_lang),
    Extension("host.domain", _host_to_domain),
)


def bundled_types() -> list[BasicType]:
    types = [
        name_type("name"),
        prefix_type("tstart"),
        fieldset_type("d"),
        integer_type("int"),
        trivial_type("size", _parse_nonneg_int, str, _add, 0),
        trivial_type("count", _parse_nonneg_int, str, _add, 0),
        trivial_type("depth", _parse_nonneg_int),
        trivial_type("port", _parse_nonneg_int),
    ]
    types += [trivial_type(n) for n in _STRING_TYPES]
    return types


def default_universe(extensions: bool = True) -> DataUniverse:
    u = DataUniverse()
    for t in bundled_types():
        u.add_type(t)
    if extensions:
        for e in BUNDLED_EXTENSIONS:
            u.add_extension(e)
    return u


_DEFAULT = default_universe()
