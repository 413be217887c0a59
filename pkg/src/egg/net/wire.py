"""Byte formats: canonical cache serialization and the request/reply frame.

Cache encoding (all integers unsigned 32-bit big-endian)::

    serialized := b"EGGC" version:u8 cache
    cache      := count:u32 pair*           # pairs in canonical order
    pair       := n:u32 (str str)^n cache   # datum entries sorted by type
    str        := len:u32 utf8-bytes

Frame, used in both directions::

    frame := b"EGGW" version:u8 len:u32 payment-bytes len:u32 body-bytes

In a request ``payment`` holds a check; in a reply it holds the receipt (or
is empty when access is denied) and ``body`` is a serialized cache.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO

from ..cache import Cache, CacheAlgebra, CacheDepthError, Pair, default_algebra
from ..data import DataError, Datum

__all__ = [
    "MalformedMessage",
    "WireMessage",
    "serialize",
    "deserialize",
    "encode_frame",
    "decode_frame",
    "read_frame",
]

CACHE_MAGIC = b"EGGC"
FRAME_MAGIC = b"EGGW"
VERSION = 1
MAX_FRAME = 16 << 20
MAX_DEPTH = 64

_U32 = struct.Struct(">I")


class MalformedMessage(ValueError):
    pass


def _value_raw(alg: CacheAlgebra, type_name: str, value) -> str:
    t = alg.universe.types.get(type_name)
    if t is None:
        raise MalformedMessage(f"cannot serialize unknown type {type_name!r}")
    return t.format(value)


def _put_str(out: bytearray, s: str) -> None:
    b = s.encode("utf-8")
    out += _U32.pack(len(b))
    out += b


def serialize(c: Cache, algebra: CacheAlgebra | None = None, max_depth: int = MAX_DEPTH) -> bytes:
    alg = algebra or default_algebra()
    if c.depth > max_depth:
        raise CacheDepthError(f"cache depth {c.depth} exceeds limit {max_depth}")
    out = bytearray(CACHE_MAGIC)
    out.append(VERSION)
    _encode(alg, c, out)
    return bytes(out)


def _encode(alg: CacheAlgebra, c: Cache, out: bytearray) -> None:
    out += _U32.pack(len(c))
    for p in c:
        out += _U32.pack(len(p.datum))
        for k, v in p.datum.items():
            _put_str(out, k)
            _put_str(out, _value_raw(alg, k, v))
        _encode(alg, p.contents, out)


class _Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise MalformedMessage(f"truncated at byte {self.pos} (wanted {n} more)")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def str(self) -> str:
        try:
            return self.take(self.u32()).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedMessage(f"bad utf-8 near byte {self.pos}") from exc


def deserialize(data: bytes, algebra: CacheAlgebra | None = None, max_depth: int = MAX_DEPTH) -> Cache:
    """Inverse of :func:`serialize`; the result is re-maximalized."""
    alg = algebra or default_algebra()
    r = _Reader(bytes(data))
    if r.take(4) != CACHE_MAGIC:
        raise MalformedMessage("not a serialized cache")
    version = r.take(1)[0]
    if version != VERSION:
        raise MalformedMessage(f"unsupported cache encoding version {version}")
    c = _decode(alg, r, max_depth)
    if r.pos != len(r.data):
        raise MalformedMessage(f"{len(r.data) - r.pos} trailing bytes")
    return c


def _decode(alg: CacheAlgebra, r: _Reader, depth_left: int) -> Cache:
    count = r.u32()
    if count and depth_left <= 0:
        raise MalformedMessage("cache nested too deeply")
    if count > len(r.data):
        raise MalformedMessage(f"implausible element count {count}")
    u = alg.universe
    pairs = []
    for _ in range(count):
        n = r.u32()
        if n > len(r.data):
            raise MalformedMessage(f"implausible entry count {n}")
        entries = {}
        for _ in range(n):
            k, raw = r.str(), r.str()
            try:
                entries[k] = u.parse_value(k, raw)
            except (DataError, ValueError, TypeError) as exc:
                raise MalformedMessage(f"bad value for {k!r}: {exc}") from exc
        try:
            datum = u.fixed_point(Datum(entries))
        except DataError as exc:
            raise MalformedMessage(str(exc)) from exc
        pairs.append(Pair(datum, _decode(alg, r, depth_left - 1)))
    return alg.maximalize(pairs)


@dataclass(frozen=True)
class WireMessage:
    payment: bytes
    body: bytes


def encode_frame(msg: WireMessage, max_frame: int = MAX_FRAME) -> bytes:
    size = 5 + 8 + len(msg.payment) + len(msg.body)
    if size > max_frame:
        raise MalformedMessage(f"frame of {size} bytes exceeds limit {max_frame}")
    return b"".join([
        FRAME_MAGIC, bytes([VERSION]),
        _U32.pack(len(msg.payment)), msg.payment,
        _U32.pack(len(msg.body)), msg.body,
    ])


def decode_frame(data: bytes, max_frame: int = MAX_FRAME) -> WireMessage:
    if len(data) > max_frame:
        raise MalformedMessage(f"frame of {len(data)} bytes exceeds limit {max_frame}")
    r = _Reader(data)
    if r.take(4) != FRAME_MAGIC:
        raise MalformedMessage("not an egg frame")
    if r.take(1)[0] != VERSION:
        raise MalformedMessage("unsupported frame version")
    payment = r.take(r.u32())
    body = r.take(r.u32())
    if r.pos != len(data):
        raise MalformedMessage("trailing bytes after frame")
    return WireMessage(payment, body)


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    chunks = []
    while n:
        chunk = stream.read(n)
        if not chunk:
            raise MalformedMessage("connection closed mid-frame")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def read_frame(stream: BinaryIO, max_frame: int = MAX_FRAME) -> WireMessage:
    head = _read_exact(stream, 5)
    if head[:4] != FRAME_MAGIC:
        raise MalformedMessage("not an egg frame")
    if head[4] != VERSION:
        raise MalformedMessage("unsupported frame version")
    budget = max_frame - 13
    n = _U32.unpack(_read_exact(stream, 4))[0]
    if n > budget:
        raise MalformedMessage("payment segment too large")
    payment = _read_exact(stream, n)
    m = _U32.unpack(_read_exact(stream, 4))[0]
    if m > budget - n:
        raise MalformedMessage("body segment too large")
    return WireMessage(payment, _read_exact(stream, m))
