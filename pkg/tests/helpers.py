"""Shared generators and small oracles for the test suite."""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path

from egg.cache import Cache, CacheAlgebra, Pair, ZERO
from egg.data import BOTTOM, BasicType, DataUniverse, Datum, default_universe

FIXTURES = Path(__file__).parent / "fixtures"

# Value pools chosen so that random data collide and compare often.
INT_VALUES = [0, 1, 2, 3]
NAME_VALUES = ["a", "b", "ab", "ba", "a*", "*b", "*"]
TEXT_VALUES = ["x", "y"]
TSTART_VALUES = ["", "c", "cl", "cla"]
HOST_VALUES = ["h1.bu.edu", "h2.bu.edu"]


def random_datum(rng: random.Random, u: DataUniverse, max_entries: int = 2) -> Datum:
    """A random datum in D over ordered (int, name, tstart) and trivial (text, host) types."""
    while True:
        entries = {}
        for _ in range(rng.randint(0, max_entries)):
            kind = rng.choice(["int", "name", "text", "tstart", "host"])
            pool = {"int": INT_VALUES, "name": NAME_VALUES, "text": TEXT_VALUES,
                    "tstart": TSTART_VALUES, "host": HOST_VALUES}[kind]
            entries[kind] = rng.choice(pool)
        d = u.datum(entries)
        if u.in_D(d):
            return d


def random_cache(rng: random.Random, alg: CacheAlgebra, depth: int = 3, width: int = 4) -> Cache:
    if depth <= 0:
        return ZERO
    pairs = []
    for _ in range(rng.randint(0, width)):
        inner = random_cache(rng, alg, depth - 1, width) if rng.random() < 0.5 else ZERO
        pairs.append(Pair(random_datum(rng, alg.universe), inner))
    return alg.maximalize(pairs)


def name_cache(rng: random.Random, alg: CacheAlgebra, names, depth: int = 2, width: int = 3) -> Cache:
    """Random caches whose data are bare literal names."""
    if depth <= 0:
        return ZERO
    pairs = []
    for _ in range(rng.randint(0, width)):
        inner = name_cache(rng, alg, names, depth - 1, width) if rng.random() < 0.5 else ZERO
        pairs.append(Pair(alg.universe.datum(name=rng.choice(names)), inner))
    return alg.maximalize(pairs)


# -- finite posets -------------------------------------------------------------

def posets(n: int) -> list[frozenset[tuple[int, int]]]:
    """All partial orders on ``range(n)`` up to isomorphism, as strict relations."""
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    seen = set()
    out = []
    for bits in range(1 << len(pairs)):
        rel = {pairs[k] for k in range(len(pairs)) if bits >> k & 1}
        if any((j, i) in rel for i, j in rel):
            continue
        if any((i, k) not in rel for i, j in rel for j2, k in rel if j == j2 and i != k):
            continue
        canon = min(tuple(sorted((p[i], p[j]) for i, j in rel)) for p in itertools.permutations(range(n)))
        if canon in seen:
            continue
        seen.add(canon)
        out.append(frozenset(rel))
    return out


def poset_universe(n: int, strict: frozenset) -> DataUniverse:
    """A universe whose single type ``p`` carries the given order on ``range(n)``."""

    def leq(a, b):
        return a == b or (a, b) in strict

    def meet(a, b):
        lower = [c for c in range(n) if leq(c, a) and leq(c, b)]
        greatest = [c for c in lower if all(leq(o, c) for o in lower)]
        return greatest[0] if greatest else BOTTOM

    u = DataUniverse()
    u.add_type(BasicType("p", leq, meet, parse=int, format=str))
    return u


def antichains(n: int, strict: frozenset) -> list[frozenset[int]]:
    out = []
    for r in range(n + 1):
        for combo in itertools.combinations(range(n), r):
            if not any((a, b) in strict for a in combo for b in combo):
                out.append(frozenset(combo))
    return out


@dataclass(frozen=True)
class FiniteLattice:
    """A small distributive lattice given by its elements, join and order."""

    name: str
    elements: tuple
    join: object
    leq: object
    bottom: object


def _powerset(k: int) -> FiniteLattice:
    elems = tuple(frozenset(c) for r in range(k + 1) for c in itertools.combinations(range(k), r))
    return FiniteLattice(f"2^{k}", elems, lambda a, b: a | b, lambda a, b: a <= b, frozenset())


def _chain(k: int) -> FiniteLattice:
    return FiniteLattice(f"chain{k}", tuple(range(k)), max, lambda a, b: a <= b, 0)


def _product(a: FiniteLattice, b: FiniteLattice) -> FiniteLattice:
    elems = tuple(itertools.product(a.elements, b.elements))
    return FiniteLattice(
        f"{a.name}x{b.name}",
        elems,
        lambda x, y: (a.join(x[0], y[0]), b.join(x[1], y[1])),
        lambda x, y: a.leq(x[0], y[0]) and b.leq(x[1], y[1]),
        (a.bottom, b.bottom),
    )


def small_lattices() -> list[FiniteLattice]:
    return [_chain(2), _chain(3), _powerset(2), _powerset(3), _product(_chain(3), _chain(2))]


def monotone_maps(n: int, strict: frozenset, m: FiniteLattice, rng: random.Random, limit: int = 20):
    maps = []
    for values in itertools.product(m.elements, repeat=n):
        if all(m.leq(values[a], values[b]) for a, b in strict):
            maps.append(values)
    rng.shuffle(maps)
    return maps[:limit]


# -- brute force down-sets ------------------------------------------------------

def meet_closure(u: DataUniverse, generators) -> list[Datum]:
    data = {u.fixed_point(g) for g in generators}
    changed = True
    while changed:
        changed = False
        for a, b in itertools.combinations(list(data), 2):
            m = u.meet(a, b)
            if u.in_D(m) and m not in data:
                data.add(m)
                changed = True
    return sorted(data, key=lambda d: d.text(u))


def depth1_caches(alg: CacheAlgebra, data) -> list[Cache]:
    out = set()
    for r in range(len(data) + 1):
        for combo in itertools.combinations(data, r):
            out.add(alg.maximalize(Pair(d, ZERO) for d in combo))
    return sorted(out, key=lambda c: c.key)


def down(alg: CacheAlgebra, pairs, universe_pairs) -> frozenset:
    return frozenset(u for u in universe_pairs if any(alg.pair_leq(u, p) for p in pairs))


def up(alg: CacheAlgebra, pairs) -> frozenset:
    return frozenset(alg.maximalize(pairs).elements)


def brute_meet(alg: CacheAlgebra, a: Cache, b: Cache, universe_pairs) -> Cache:
    """``(A↓ ∩ B↓)↑`` computed over a finite, meet-closed set of pairs."""
    return alg.maximalize(down(alg, a.elements, universe_pairs) & down(alg, b.elements, universe_pairs))


def brute_select(alg: CacheAlgebra, a: Cache, d: Datum) -> Cache:
    """``(a,X)/d = X ∧ (d,1)``, expanded element by element."""
    u = alg.universe
    out = []
    for p in a.elements:
        for q in p.contents.elements:
            m = u.meet(q.datum, d)
            if u.in_D(m):
                out.append(Pair(m, q.contents))
    return alg.maximalize(out)


def brute_deep_select(alg: CacheAlgebra, a: Cache, d: Datum) -> Cache:
    u = alg.universe
    out = []

    def walk(c: Cache) -> None:
        for p in c.elements:
            m = u.meet(p.datum, d)
            if u.in_D(m):
                out.append(Pair(m, p.contents))
            walk(p.contents)

    walk(a)
    return alg.maximalize(out)


# -- banks -----------------------------------------------------------------------

@dataclass
class World:
    """Named identities and banks over the deterministic mock scheme."""

    names: tuple[str, ...]
    seed: int = 0
    banks: dict = field(default_factory=dict)
    in_transit: list = field(default_factory=list)

    def __post_init__(self):
        from datetime import datetime, timezone

        from egg.currency.bank import Bank
        from egg.currency.signing import Identity, MockScheme

        self.scheme = MockScheme(seed=self.seed * 1000)
        ids = {n: Identity.generate(n, self.scheme) for n in self.names}
        directory = {i.public_key: n for n, i in ids.items()}
        counter = itertools.count()
        clock = lambda: datetime(2011, 1, 1, tzinfo=timezone.utc)  # noqa: E731
        for n, i in ids.items():
            self.banks[n] = Bank(i, directory=dict(directory), clock=clock,
                                 tracking=lambda n=n: f"{n}-{next(counter):06d}")

    def __getitem__(self, name: str):
        return self.banks[name]

    def key(self, name: str) -> bytes:
        return self.banks[name].key

    def all_checks(self):
        return [c for b in self.banks.values() for c in b.checks()] + list(self.in_transit)

    def names_of(self, key: bytes) -> str:
        return next(iter(self.banks.values())).name_of(key)


def random_economy(world: World, rng: random.Random, steps: int) -> dict[bytes, Decimal]:
    """Drive honest banks through random operations; return the total minted per minter."""
    from egg.currency.checks import is_receipt, return_state

    minted: dict[bytes, Decimal] = {}
    names = list(world.names)

    def route(bank, c):
        if c.owner != bank.key:
            world.in_transit.append(c)

    for _ in range(steps):
        op = rng.choice(["mint", "give", "pay", "pay", "deliver", "deliver", "cash"])
        bank = world[rng.choice(names)]
        to = world.key(rng.choice(names))
        if op == "mint":
            amount = Decimal(rng.randint(1, 400)) / 4
            c = bank.mint(amount, recipient=to)
            minted[bank.key] = minted.get(bank.key, Decimal(0)) + amount
            route(bank, c)
        elif op in ("give", "pay"):
            spendable = bank.spendable()
            if not spendable:
                continue
            c = rng.choice(spendable)
            if op == "give":
                route(bank, bank.transfer_gift(c, to))
            else:
                amount = max(Decimal("0.25"), (c.denomination * rng.randint(1, 4) / 4).quantize(Decimal("0.01")))
                payment, _ = bank.pay(c, min(amount, c.denomination), to)
                route(bank, payment)
        elif op == "deliver":
            if not world.in_transit:
                continue
            c = world.in_transit.pop(rng.randrange(len(world.in_transit)))
            owner = next(b for b in world.banks.values() if b.key == c.owner)
            route(owner, owner.settle(c))
        else:
            returning = [c for c in bank.vault.values() if return_state(c) is not None and not is_receipt(c)]
            if returning:
                route(bank, bank.cash_and_return(rng.choice(returning)))
    return minted
