"""Local files and directories as caches.

A directory is ``({path}, children)`` and a file is ``({path, size, text}, 0)``
(``text`` only for small UTF-8 files).  Names, extensions and the rest are
filled in by the bundled extensions.
"""
from __future__ import annotations

import os
from pathlib import Path

from .cache import Cache, CacheAlgebra, Pair, ZERO
from .data import Datum

MAX_TEXT_BYTES = 1 << 20


def file_datum(alg: CacheAlgebra, path: Path) -> Datum:
    entries: dict = {"path": str(path)}
    try:
        size = path.stat().st_size
    except OSError:
        size = None
    if size is not None:
        entries["size"] = size
        if size <= MAX_TEXT_BYTES:
            try:
                entries["text"] = path.read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError):
                pass
    return alg.universe.fixed_point(Datum(entries))


def tree(alg: CacheAlgebra, path: str | os.PathLike, max_depth: int = 16) -> Cache:
    """The singleton cache for ``path``; error data if it does not exist."""
    p = Path(path)
    if not p.exists():
        return alg.error(f"no such file or directory: {p}")
    return alg.maximalize([_node(alg, p, max_depth)])


def _node(alg: CacheAlgebra, p: Path, depth: int) -> Pair:
    if p.is_dir() and not p.is_symlink():
        datum = alg.universe.fixed_point(Datum({"path": str(p)}))
        children = []
        if depth > 0:
            try:
                entries = sorted(p.iterdir())
            except OSError as exc:
                return Pair(datum, alg.error(f"cannot list {p}", exc))
            children = [_node(alg, c, depth - 1) for c in entries if not c.name.startswith(".")]
        return Pair(datum, alg.maximalize(children))
    return Pair(file_datum(alg, p), ZERO)
