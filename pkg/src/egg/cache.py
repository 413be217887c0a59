"""Caches: the free distributive lattice over pairs of data and caches.

A cache is a finite antichain of ``(datum, cache)`` pairs ordered by
``(d, c) <= (d', c')`` iff ``d <= d'`` and ``c <= c'``.  Join is the maximal
elements of the union.  Meet is the maximal elements of the intersection of
down-sets; on this poset the down-sets of two pairs intersect in the down-set
of the single pair ``(d ^ e, X ^ Y)`` whenever ``d ^ e`` contains no bottom,
and are disjoint otherwise, so meet is computed pairwise.
"""
from __future__ import annotations

import traceback as _tb
from dataclasses import dataclass
from functools import reduce
from typing import Any, Callable, Iterable, Iterator, TypeVar

from .data import DataUniverse, Datum, default_universe

__all__ = [
    "Cache",
    "CacheAlgebra",
    "CacheDepthError",
    "Pair",
    "Selector",
    "ZERO",
    "default_algebra",
    "free_map",
    "render",
]

DEFAULT_MAX_DEPTH = 64


class CacheDepthError(ValueError):
    pass


class Pair:
    __slots__ = ("datum", "contents", "_key", "_hash")

    def __init__(self, datum: Datum, contents: Cache):
        self.datum = datum
        self.contents = contents
        self._key = None
        self._hash = None

    @property
    def key(self) -> str:
        if self._key is None:
            self._key = f"({self.datum.text()},{self.contents.key})"
        return self._key

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pair):
            return NotImplemented
        if self is other:
            return True
        return hash(self) == hash(other) and self.datum == other.datum and self.contents == other.contents

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.datum, self.contents))
        return self._hash

    def __iter__(self):
        yield self.datum
        yield self.contents

    def __repr__(self) -> str:
        return f"Pair{self.key}"


class Cache:
    """An immutable antichain of pairs, canonically sorted.

    Build caches through :class:`CacheAlgebra`, which maximalizes; the
    constructor trusts its input.
    """

    __slots__ = ("elements", "depth", "_hash", "_key")

    def __init__(self, elements: Iterable[Pair] = ()):
        elems = tuple(sorted(elements, key=lambda p: p.key))
        self.elements = elems
        self.depth = 1 + max(p.contents.depth for p in elems) if elems else 0
        self._hash = None
        self._key = None

    @property
    def key(self) -> str:
        if self._key is None:
            self._key = " ∨ ".join(p.key for p in self.elements) if self.elements else "0"
        return self._key

    def __iter__(self) -> Iterator[Pair]:
        return iter(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __bool__(self) -> bool:
        return bool(self.elements)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Cache):
            return NotImplemented
        if self is other:
            return True
        return hash(self) == hash(other) and self.elements == other.elements

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self.elements)
        return self._hash

    def __repr__(self) -> str:
        return f"Cache({self.key})"

    def data(self) -> list[Datum]:
        return [p.datum for p in self.elements]


ZERO = Cache()


def render(c: Cache) -> str:
    """Algebraic notation: ``(a,X) ∨ (b,Y)``, with ``0`` for the empty cache."""
    return c.key


@dataclass(frozen=True)
class Selector:
    """The virtual pair ``(d, 1)`` whose contents sit above every cache."""

    datum: Datum


T = TypeVar("T")


def free_map(f: Callable[[Any], T], antichain: Iterable[Any], join: Callable[[T, T], T], bottom: T) -> T:
    """Extend ``f`` on a poset to the join-morphism on its antichains."""
    return reduce(join, (f(a) for a in antichain), bottom)


class CacheAlgebra:
    """The operations ``∨ ∧ / // <`` over a given data universe.

    ``registry`` supplies put behaviour per ``type`` value; when omitted the
    bundled subtype registry is used.
    """

    def __init__(self, universe: DataUniverse | None = None, registry=None,
                 max_depth: int = DEFAULT_MAX_DEPTH):
        self.universe = universe or default_universe()
        if registry is None:
            from .subtypes import default_registry
            registry = default_registry()
        self.registry = registry
        self.max_depth = max_depth
        self._leq_memo: dict = {}
        self._meet_memo: dict = {}

    # -- construction -----------------------------------------------------
    def pair(self, datum: Datum, contents: Cache = ZERO) -> Pair:
        return Pair(datum, contents)

    def singleton(self, datum: Datum | dict | None = None, contents: Cache = ZERO, **kw) -> Cache:
        if not isinstance(datum, Datum):
            datum = self.universe.datum(datum, **kw)
        return self.maximalize([Pair(datum, contents)])

    def make(self, *pairs: Pair | tuple) -> Cache:
        return self.maximalize(p if isinstance(p, Pair) else Pair(*p) for p in pairs)

    def maximalize(self, pairs: Iterable[Pair]) -> Cache:
        """The maximal elements; pairs whose datum is not in D are dropped."""
        in_D = self.universe.in_D
        cands = list({p for p in pairs if in_D(p.datum)})
        if len(cands) > 1:
            keep = []
            for i, p in enumerate(cands):
                if not any(j != i and self.pair_leq(p, q) for j, q in enumerate(cands)):
                    keep.append(p)
            cands = keep
        out = Cache(cands)
        if out.depth > self.max_depth:
            raise CacheDepthError(f"cache depth {out.depth} exceeds limit {self.max_depth}")
        return out

    # -- order ------------------------------------------------------------
    def pair_leq(self, p: Pair, q: Pair) -> bool:
        if p is q:
            return True
        return self.universe.leq(p.datum, q.datum) and self.leq(p.contents, q.contents)

    def leq(self, a: Cache, b: Cache) -> bool:
        if not a.elements or a is b:
            return True
        if not b.elements:
            return False
        key = (a, b)
        hit = self._leq_memo.get(key)
        if hit is None:
            hit = all(any(self.pair_leq(p, q) for q in b.elements) for p in a.elements)
            self._remember(self._leq_memo, key, hit)
        return hit

    cache_leq = leq

    @staticmethod
    def _remember(memo: dict, key, value) -> None:
        if len(memo) > 200_000:
            memo.clear()
        memo[key] = value

    # -- lattice ----------------------------------------------------------
    def join(self, *caches: Cache) -> Cache:
        nonempty = [c for c in caches if c.elements]
        if not nonempty:
            return ZERO
        if len(nonempty) == 1:
            return nonempty[0]
        return self.maximalize(p for c in nonempty for p in c.elements)

    def meet_pair(self, p: Pair, q: Pair) -> Pair | None:
        d = self.universe.meet(p.datum, q.datum)
        if not self.universe.in_D(d):
            return None
        return Pair(d, self.meet(p.contents, q.contents))

    def meet(self, a: Cache, b: Cache) -> Cache:
        if not a.elements or not b.elements:
            return ZERO
        if a is b:
            return a
        key = (a, b) if a.key <= b.key else (b, a)
        hit = self._meet_memo.get(key)
        if hit is None:
            pairs = (self.meet_pair(p, q) for p in a.elements for q in b.elements)
            hit = self.maximalize(p for p in pairs if p is not None)
            self._remember(self._meet_memo, key, hit)
        return hit

    def meet_selector(self, x: Cache, sel: Selector) -> Cache:
        """``X ∧ (d, 1)``: keep each element refined by ``d``, contents intact."""
        if not sel.datum:
            return x
        out = []
        for p in x.elements:
            d = self.universe.meet(p.datum, sel.datum)
            if self.universe.in_D(d):
                out.append(Pair(d, p.contents))
        return self.maximalize(out)

    # -- selection --------------------------------------------------------
    def select(self, a: Cache, d: Datum) -> Cache:
        """``a/d``; ``a/{}`` is the contents of ``a``."""
        sel = Selector(d)
        return self.join(*(self.meet_selector(p.contents, sel) for p in a.elements))

    def contents(self, a: Cache) -> Cache:
        return self.select(a, Datum())

    def deep_select(self, a: Cache, d: Datum) -> Cache:
        """``a//d``: ``(x,X)//d = [(x,X) ∧ (d,1)] ∨ (X//d)``."""
        sel = Selector(d)
        parts = []
        for p in a.elements:
            parts.append(self.meet_selector(Cache([p]), sel))
            parts.append(self.deep_select(p.contents, d))
        return self.join(*parts)

    # -- put --------------------------------------------------------------
    def put(self, a: Cache, y: Cache) -> Cache:
        """``a < y``, distributing over the elements of ``a``."""
        out = []
        for p in a.elements:
            handler = self.registry.dispatch(p.datum)
            try:
                contents = handler.put_fn(p.datum, p.contents, y, self)
                if not isinstance(contents, Cache):
                    raise TypeError(f"put for {handler.type_name!r} returned {type(contents).__name__}")
            except Exception as exc:  # errors become data
                contents = self.error(f"{handler.type_name}: {exc}", exc)
            out.append(Pair(p.datum, contents))
        return self.maximalize(out)

    # -- errors -----------------------------------------------------------
    def error_datum(self, message: str, exc: BaseException | None = None) -> Datum:
        entries = {"error": message}
        if exc is not None:
            entries["errorbase"] = f"{type(exc).__name__}: {exc}"
            entries["traceback"] = "".join(_tb.format_exception(type(exc), exc, exc.__traceback__))[-2000:]
        return Datum(entries)

    def error(self, message: str, exc: BaseException | None = None) -> Cache:
        return Cache([Pair(self.error_datum(message, exc), ZERO)])

    def has_error(self, c: Cache) -> bool:
        return any("error" in p.datum for p in c.elements)

    def render(self, c: Cache) -> str:
        return render(c)


_default: CacheAlgebra | None = None


def default_algebra() -> CacheAlgebra:
    global _default
    if _default is None:
        _default = CacheAlgebra()
    return _default
