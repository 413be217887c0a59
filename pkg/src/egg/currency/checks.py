"""Checks: recursively signed payloads.

A leaf is ``(payload, minter key, recipient key)`` signed by the minter; a
node is ``(payload, inner check, recipient key)`` signed by the owner of the
inner check.  The owner of a check is its outermost recipient.

Canonical bytes (all strings are u32-length-prefixed)::

    check   := b"C" version:u8 kind:(b"L" | b"N") payload (minter | inner) recipient signature
    payload := denomination start expires tracking payment
    inner   := the canonical bytes of the inner check

The signature covers everything before it.  Dates are ISO-8601 UTC and the
denomination is an exact decimal string.
"""
from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from functools import cached_property
from typing import Callable, Iterable, Sequence

from .signing import ED25519, SignatureScheme, fingerprint

__all__ = [
    "Payload",
    "Check",
    "CheckFormatError",
    "verify_chain",
    "display_check",
    "parse_display",
    "match_currency",
    "PatternError",
    "return_state",
    "is_receipt",
    "match_names",
]

_U32 = struct.Struct(">I")
VERSION = 1

NameResolver = Callable[[bytes], str]


class CheckFormatError(ValueError):
    pass


class PatternError(ValueError):
    pass


def _iso(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_iso(text: str) -> datetime:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


@dataclass(frozen=True)
class Payload:
    denomination: Decimal
    start: datetime
    expires: datetime
    tracking: str
    payment: bool = False

    def __post_init__(self):
        if self.start > self.expires:
            raise ValueError("start date after expiration date")
        if not self.denomination.is_finite() or self.denomination < 0:
            raise ValueError("denomination must be a finite non-negative decimal")

    def fields(self) -> list[str]:
        return [str(self.denomination), _iso(self.start), _iso(self.expires), self.tracking,
                "1" if self.payment else "0"]


def _put(out: bytearray, b: bytes) -> None:
    out += _U32.pack(len(b))
    out += b


@dataclass(frozen=True, eq=False)
class Check:
    payload: Payload
    recipient: bytes
    signature: bytes
    inner: Check | None = None
    minter: bytes | None = None  # leaves only

    @property
    def is_leaf(self) -> bool:
        return self.inner is None

    @property
    def owner(self) -> bytes:
        return self.recipient

    @property
    def signer(self) -> bytes:
        return self.minter if self.inner is None else self.inner.recipient

    @property
    def denomination(self) -> Decimal:
        return self.payload.denomination

    @property
    def tracking(self) -> str:
        return self.payload.tracking

    @cached_property
    def body(self) -> bytes:
        """The signed part of the canonical bytes."""
        out = bytearray(b"C")
        out.append(VERSION)
        out += b"L" if self.inner is None else b"N"
        for f in self.payload.fields():
            _put(out, f.encode())
        _put(out, self.minter if self.inner is None else self.inner.to_bytes())
        _put(out, self.recipient)
        return bytes(out)

    def to_bytes(self) -> bytes:
        out = bytearray(self.body)
        _put(out, self.signature)
        return bytes(out)

    def __eq__(self, other) -> bool:
        return isinstance(other, Check) and self.to_bytes() == other.to_bytes()

    def __hash__(self) -> int:
        return hash(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> Check:
        check, pos = _decode(bytes(data), 0)
        if pos != len(data):
            raise CheckFormatError("trailing bytes after check")
        return check

    @classmethod
    def sign_new(cls, payload: Payload, recipient: bytes, signer, inner: Check | None = None) -> Check:
        """Build and sign a layer; ``signer`` is an :class:`Identity`."""
        minter = signer.public_key if inner is None else None
        unsigned = cls(payload, recipient, b"", inner, minter)
        return cls(payload, recipient, signer.sign(unsigned.body), inner, minter)

    def layers(self) -> list[Check]:
        """Innermost first."""
        out = []
        c: Check | None = self
        while c is not None:
            out.append(c)
            c = c.inner
        out.reverse()
        return out

    def keys(self) -> list[bytes]:
        """Minter followed by each layer's recipient."""
        layers = self.layers()
        return [layers[0].minter] + [c.recipient for c in layers]

    def payment_positions(self) -> list[int]:
        """Indices into :meth:`keys` of hops that were payments."""
        return [i + 1 for i, c in enumerate(self.layers()) if c.payload.payment]

    def has_payment(self) -> bool:
        return any(c.payload.payment for c in self.layers())

    def minted_by(self) -> bytes:
        return self.layers()[0].minter

    def hex(self) -> str:
        return self.to_bytes().hex()

    @classmethod
    def from_hex(cls, text: str) -> Check:
        try:
            return cls.from_bytes(bytes.fromhex(text.strip()))
        except ValueError as exc:
            raise CheckFormatError(str(exc)) from exc


def _take(data: bytes, pos: int) -> tuple[bytes, int]:
    if pos + 4 > len(data):
        raise CheckFormatError("truncated check")
    n = _U32.unpack_from(data, pos)[0]
    pos += 4
    if pos + n > len(data):
        raise CheckFormatError("truncated check")
    return data[pos:pos + n], pos + n


def _decode(data: bytes, pos: int) -> tuple[Check, int]:
    if data[pos:pos + 1] != b"C" or len(data) < pos + 3:
        raise CheckFormatError("not a check")
    if data[pos + 1] != VERSION:
        raise CheckFormatError(f"unsupported check version {data[pos + 1]}")
    kind = data[pos + 2:pos + 3]
    if kind not in (b"L", b"N"):
        raise CheckFormatError("bad check kind")
    pos += 3
    fields = []
    for _ in range(5):
        raw, pos = _take(data, pos)
        try:
            fields.append(raw.decode("utf-8", errors="strict"))
        except UnicodeDecodeError as exc:
            raise CheckFormatError("payload field is not UTF-8") from exc
    try:
        payload = Payload(Decimal(fields[0]), _parse_iso(fields[1]), _parse_iso(fields[2]), fields[3],
                          {"1": True, "0": False}[fields[4]])
    except (InvalidOperation, ValueError, KeyError) as exc:
        raise CheckFormatError(f"bad payload: {exc}") from exc
    middle, pos = _take(data, pos)
    recipient, pos = _take(data, pos)
    signature, pos = _take(data, pos)
    if kind == b"L":
        return Check(payload, recipient, signature, None, middle), pos
    inner = Check.from_bytes(middle)
    return Check(payload, recipient, signature, inner, None), pos


def verify_chain(c: Check, scheme: SignatureScheme = ED25519) -> bool:
    """Every layer's signature verifies and nodes are signed by the inner owner."""
    try:
        for layer in c.layers():
            if not scheme.verify(layer.signer, layer.body, layer.signature):
                return False
        return True
    except Exception:
        return False


def return_state(c: Check) -> tuple[int, int] | None:
    """``(payment layer index, returns so far)``, or None without a payment.

    Raises ``ValueError`` when the layers after the payment do not retrace
    the signers back toward the minter.
    """
    layers = c.layers()
    paid = [i for i, layer in enumerate(layers) if layer.payload.payment]
    if not paid:
        return None
    if len(paid) > 1:
        raise ValueError("more than one payment layer")
    p = paid[0]
    returns = len(layers) - 1 - p
    if returns > p + 1:
        raise ValueError("check returned past its minter")
    for k in range(returns):
        if layers[p + 1 + k].recipient != layers[p - k].signer:
            raise ValueError("return hop does not retrace the check sequence")
    return p, returns


def is_receipt(c: Check) -> bool:
    try:
        state = return_state(c)
    except ValueError:
        return False
    return state is not None and state[1] == state[0] + 1


# -- display -------------------------------------------------------------------

def _date_text(dt: datetime) -> str:
    return f"{dt:%b} {dt.day},{dt.year}"


def display_check(c: Check, names: NameResolver | None = None, show_date: bool = True,
                  marker: str = "_{}_") -> str:
    """``100[Jan 1,2011]BostonUniversity.Alice.Bob``; payment hops use ``marker``."""
    names = names or fingerprint
    paid = set(c.payment_positions())
    parts = [marker.format(names(k)) if i in paid else names(k) for i, k in enumerate(c.keys())]
    date = f"[{_date_text(c.payload.start)}]" if show_date else ""
    return f"{c.denomination}{date}{'.'.join(parts)}"


_DISPLAY = re.compile(r"(?P<amount>\d+(?:\.\d+)?)(?:\[(?P<date>[^\]]*)\])?(?P<chain>.+)\Z")


def parse_display(text: str, marker: str = "_{}_") -> tuple[Decimal, str | None, list[str], list[int]]:
    """Recover ``(denomination, date text, names, payment positions)``."""
    m = _DISPLAY.match(text)
    if not m:
        raise ValueError(f"not a check display: {text!r}")
    prefix, suffix = marker.split("{}")
    names, paid = [], []
    for i, part in enumerate(m["chain"].split(".")):
        if prefix + suffix and part.startswith(prefix) and part.endswith(suffix) and len(part) > len(prefix + suffix):
            part = part[len(prefix):len(part) - len(suffix)]
            paid.append(i)
        names.append(part)
    return Decimal(m["amount"]), m["date"], names, paid


# -- currency patterns ---------------------------------------------------------

def _parse_pattern(pattern: str) -> list[str]:
    if not pattern or any(not seg for seg in pattern.split(".")):
        raise PatternError(f"malformed currency pattern {pattern!r}")
    return pattern.split(".")


def _match_names(pat: Sequence[str], names: Sequence[str]) -> bool:
    if not pat:
        return not names
    head = pat[0]
    if head == "*":
        # a trailing star is any suffix, possibly empty; elsewhere it spans at least one hop
        lo = 0 if len(pat) == 1 else 1
        return any(_match_names(pat[1:], names[k:]) for k in range(lo, len(names) + 1))
    if not names:
        return False
    if head == "?" or head == names[0]:
        return _match_names(pat[1:], names[1:])
    return False


def match_names(pattern: str, names: Iterable[str]) -> bool:
    """Match a dotted name chain: ``?`` is exactly one hop, ``*`` is one or more
    hops, or any suffix (including none) when it ends the pattern."""
    return _match_names(_parse_pattern(pattern), list(names))


def match_currency(pattern: str, c: Check, names: NameResolver | None = None) -> bool:
    names = names or fingerprint
    return match_names(pattern, [names(k) for k in c.keys()])
