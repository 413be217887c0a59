"""The rolodex: known people, their public keys and home cache expressions.

File format, plain UTF-8 text::

    # egg rolodex v1
    <name> TAB <public key hex, or -> TAB <home cache expression>

Blank lines and other ``#`` lines are ignored.  A home expression is an
ordinary shell line; evaluating it yields the person's home cache, which
appears under their name in the ``@`` reference.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from ..cache import Cache
from ..currency.signing import fingerprint

__all__ = ["Rolodex", "RolodexEntry", "resolve_home", "HEADER"]

HEADER = "# egg rolodex v1"


@dataclass(frozen=True)
class RolodexEntry:
    name: str
    public_key: bytes | None
    home: str


@dataclass
class Rolodex:
    entries: dict[str, RolodexEntry] = field(default_factory=dict)

    def add(self, name: str, public_key: bytes | None = None, home: str = "") -> RolodexEntry:
        if not name or any(ch in name for ch in "\t\n./"):
            raise ValueError(f"bad rolodex name {name!r}")
        entry = RolodexEntry(name, public_key, home)
        self.entries[name] = entry
        return entry

    def names(self) -> list[str]:
        return sorted(self.entries)

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def key_of(self, name: str) -> bytes | None:
        return self.entries[name].public_key

    def name_of(self, key: bytes) -> str:
        """Display name for a key, falling back to its fingerprint."""
        for entry in self.entries.values():
            if entry.public_key == key:
                return entry.name
        return fingerprint(key)

    def directory(self) -> dict[bytes, str]:
        return {e.public_key: e.name for e in self.entries.values() if e.public_key}

    @classmethod
    def load(cls, path: str | os.PathLike) -> Rolodex:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or lines[0].strip() != HEADER:
            raise ValueError(f"{path}: missing rolodex header {HEADER!r}")
        rolodex = cls()
        for n, line in enumerate(lines[1:], start=2):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t", 2)
            if len(parts) != 3:
                raise ValueError(f"{path}:{n}: expected name, key and home separated by tabs")
            name, key, home = (part.strip() for part in parts)
            rolodex.add(name, None if key == "-" else bytes.fromhex(key), home)
        return rolodex

    def save(self, path: str | os.PathLike) -> None:
        out = [HEADER]
        for name in self.names():
            e = self.entries[name]
            out.append(f"{name}\t{e.public_key.hex() if e.public_key else '-'}\t{e.home}")
        Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def resolve_home(name: str, rolodex: Rolodex, env) -> Cache:
    """Evaluate ``name``'s home expression in a scratch copy of ``env``."""
    alg = env.algebra
    if name not in rolodex:
        return alg.error(f"unknown person {name!r}")
    home = rolodex.entries[name].home
    if not home:
        return alg.singleton({"person": name})
    try:
        return env.child().compile(home)
    except Exception as exc:  # parse errors included: a bad entry must not break @
        return alg.error(f"home of {name}: {exc}", exc)
