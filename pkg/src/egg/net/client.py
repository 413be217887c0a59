"""Client side of the cache protocol and proxies for remote caches."""
from __future__ import annotations

import socket
from dataclasses import dataclass
from typing import Callable

from ..cache import Cache, CacheAlgebra, ZERO, default_algebra
from ..currency.checks import Check, CheckFormatError, verify_chain
from ..currency.signing import ED25519, SignatureScheme
from ..data import Datum
from .server import op_cache
from .wire import MalformedMessage, WireMessage, deserialize, encode_frame, read_frame, serialize

__all__ = ["ClientResult", "client_execute", "ProxyCache", "proxy_op", "Address"]

Address = Datum | tuple[str, int]


@dataclass(frozen=True)
class ClientResult:
    receipt: Check | None
    result: Cache
    status: str  # ok | connection-error | malformed | bad-receipt | server-error

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _endpoint(addr: Address) -> tuple[str, int]:
    if isinstance(addr, tuple):
        return addr
    if "host" not in addr or "port" not in addr:
        raise ValueError("address needs host and port entries")
    return addr["host"], int(addr["port"])


def receipt_matches(receipt: Check, payment: Check, scheme: SignatureScheme) -> bool:
    """The receipt is the payment sent one hop back to whoever signed it."""
    return (
        receipt.inner is not None
        and receipt.inner.to_bytes() == payment.to_bytes()
        and receipt.recipient == payment.signer
        and not receipt.payload.payment
        and verify_chain(receipt, scheme)
    )


def client_execute(addr: Address, x: Cache, payment: Check, *, algebra: CacheAlgebra | None = None,
                   scheme: SignatureScheme = ED25519, timeout: float = 10.0) -> ClientResult:
    alg = algebra or default_algebra()
    try:
        host, port = _endpoint(addr)
        frame = encode_frame(WireMessage(payment.to_bytes(), serialize(x, alg)))
        with socket.create_connection((host, port), timeout=timeout) as sock:
            sock.sendall(frame)
            with sock.makefile("rb") as stream:
                reply = read_frame(stream)
    except MalformedMessage as exc:
        return ClientResult(None, alg.error(f"malformed reply: {exc}", exc), "malformed")
    except (OSError, ValueError) as exc:
        return ClientResult(None, alg.error(f"cannot reach server: {exc}", exc), "connection-error")
    try:
        result = deserialize(reply.body, alg)
    except MalformedMessage as exc:
        return ClientResult(None, alg.error(f"malformed reply: {exc}", exc), "malformed")
    if not reply.payment:
        return ClientResult(None, result, "server-error")
    try:
        receipt = Check.from_bytes(reply.payment)
    except CheckFormatError as exc:
        return ClientResult(None, alg.join(result, alg.error(f"bad receipt: {exc}", exc)), "bad-receipt")
    if not receipt_matches(receipt, payment, scheme):
        return ClientResult(receipt, alg.join(result, alg.error("bad receipt")), "bad-receipt")
    return ClientResult(receipt, result, "ok")


@dataclass
class ProxyCache:
    """A remote cache reached through paid requests.

    ``pay`` produces a fresh payment check for each request; ``on_receipt``
    (for example a bank's ``settle``) is called with every good receipt.
    """

    address: Datum
    pay: Callable[[], Check]
    on_receipt: Callable[[Check], object] | None = None
    algebra: CacheAlgebra | None = None
    scheme: SignatureScheme = ED25519
    last: ClientResult | None = None

    def request(self, x: Cache) -> Cache:
        res = client_execute(self.address, x, self.pay(), algebra=self.algebra, scheme=self.scheme)
        self.last = res
        if res.ok and self.on_receipt is not None:
            self.on_receipt(res.receipt)
        return res.result

    def join(self, y: Cache) -> Cache:
        return proxy_op(self, "join", y)

    def meet(self, y: Cache) -> Cache:
        return proxy_op(self, "meet", y)

    def select(self, d: Datum) -> Cache:
        return proxy_op(self, "select", d)

    def deep_select(self, d: Datum) -> Cache:
        return proxy_op(self, "deep_select", d)

    def put(self, y: Cache) -> Cache:
        return proxy_op(self, "put", y)


def proxy_op(p: ProxyCache, op: str, arg: Cache | Datum = ZERO) -> Cache:
    alg = p.algebra or default_algebra()
    return p.request(op_cache(alg, op, arg))
