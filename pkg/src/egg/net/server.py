"""A payment-gated cache server.

Each connection carries one request frame and gets one reply frame.  The
request's payment segment is a check paid to the server; the body is a
serialized cache ``X``.  Elements of ``X`` whose datum has ``type:op`` ask
for an operation against the exported root::

    ({type:op, op:join}, Y)         root ∨ Y
    ({type:op, op:meet}, Y)         root ∧ Y
    ({type:op, op:select}, (d,0))   root/d   (one element per datum d)
    ({type:op, op:deep_select}, (d,0))  root//d
    ({type:op, op:put}, Y)          root < Y, and the root becomes the result

Every other element contributes its contents, so a plain ``X`` is answered
with ``X/``.  The joined answer passes through the server filter before it
is serialized.  The reply's payment segment holds the receipt: the paid
check returned one hop to the payer.
"""
from __future__ import annotations

import logging
import socketserver
import threading
from dataclasses import dataclass, field

from ..cache import Cache, CacheAlgebra, Pair, ZERO
from ..currency.bank import Bank, BankError
from ..currency.checks import Check, CheckFormatError
from ..data import Datum
from ..subtypes import server_filter
from .wire import MalformedMessage, WireMessage, deserialize, encode_frame, read_frame, serialize

__all__ = ["ServerConfig", "EggServer", "execute", "serve", "OPS", "op_cache"]

log = logging.getLogger(__name__)

OPS = ("join", "meet", "select", "deep_select", "put")


def op_cache(alg: CacheAlgebra, op: str, operand: Cache | Datum) -> Cache:
    """Encode one operation request as a cache."""
    if op not in OPS:
        raise ValueError(f"unknown operation {op!r}")
    if isinstance(operand, Datum):
        operand = Cache([Pair(operand, ZERO)])
    return Cache([Pair(Datum({"type": "op", "op": op}), operand)])


@dataclass
class ServerConfig:
    bank: Bank
    root: Cache = ZERO
    port: int = 0
    host: str = "127.0.0.1"
    algebra: CacheAlgebra = field(default_factory=CacheAlgebra)
    allowed_types: tuple[str, ...] = ("storage",)
    max_elements: int = 10_000

    @property
    def identity(self):
        return self.bank.identity

    @property
    def preferences(self):
        return self.bank.preferences


def execute(alg: CacheAlgebra, root: Cache, x: Cache) -> tuple[Cache, Cache]:
    """Answer request ``x`` against ``root``; returns ``(result, new root)``."""
    parts = []
    for p in x:
        if p.datum.get("type") != "op":
            parts.append(p.contents)
            continue
        op = p.datum.get("op")
        arg = p.contents
        if op == "join":
            parts.append(alg.join(root, arg))
        elif op == "meet":
            parts.append(alg.meet(root, arg))
        elif op == "select":
            parts.append(alg.join(*(alg.select(root, q.datum) for q in arg)))
        elif op == "deep_select":
            parts.append(alg.join(*(alg.deep_select(root, q.datum) for q in arg)))
        elif op == "put":
            root = alg.put(root, arg)
            parts.append(root)
        else:
            parts.append(alg.error(f"unknown operation {op!r}"))
    return alg.join(*parts), root


class _Handler(socketserver.StreamRequestHandler):
    server: EggServer

    def handle(self) -> None:
        try:
            msg = read_frame(self.rfile)
        except MalformedMessage as exc:
            self._reply(b"", self.server.error(f"malformed request: {exc}"))
            return
        except OSError:
            return
        receipt, result = self.server.answer(msg)
        self._reply(receipt, result)

    def _reply(self, receipt: bytes, result: Cache) -> None:
        try:
            self.wfile.write(encode_frame(WireMessage(receipt, serialize(result, self.server.config.algebra))))
            self.wfile.flush()
        except OSError:
            log.debug("client went away before the reply")


class EggServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, config: ServerConfig):
        self.config = config
        self.root = config.root
        self._lock = threading.Lock()
        self._filter = server_filter(config.allowed_types, config.max_elements)
        self._thread: threading.Thread | None = None
        super().__init__((config.host, config.port), _Handler)

    @property
    def port(self) -> int:
        return self.server_address[1]

    def error(self, message: str) -> Cache:
        return self.config.algebra.error(message)

    def answer(self, msg: WireMessage) -> tuple[bytes, Cache]:
        """Validate the payment, cash it and compute the filtered result."""
        alg = self.config.algebra
        bank = self.config.bank
        try:
            x = deserialize(msg.body, alg)
        except MalformedMessage as exc:
            return b"", self.error(f"malformed request: {exc}")
        try:
            payment = Check.from_bytes(msg.payment)
        except CheckFormatError as exc:
            return b"", self.error(f"access denied: {exc}")
        with self._lock:
            reason = bank.validate_payment(payment)
            if reason is not None:
                return b"", self.error(f"access denied: {reason}")
            try:
                bank.receive(payment)
                receipt = bank.cash_and_return(payment)
            except BankError as exc:
                return b"", self.error(f"access denied: {exc}")
            result, self.root = execute(alg, self.root, x)
        filtered = self._filter(Datum({"type": "server"}), ZERO, result, alg)
        return receipt.to_bytes(), filtered

    def start(self) -> EggServer:
        """Serve from a background thread; returns self."""
        self._thread = threading.Thread(target=self.serve_forever, name="egg-server", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


def serve(config: ServerConfig) -> None:
    with EggServer(config) as server:
        log.info("serving on %s:%d", config.host, server.port)
        server.serve_forever()
