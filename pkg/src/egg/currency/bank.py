"""Banks: minting, gifts, payments, returns, preferences and audits.

A bank directory holds::

    key.json        the bank identity (see :class:`Identity`)
    prefs.txt       preference rows, ``<pattern> <weight>`` per line
    ledger.jsonl    append-only operations, first line is a versioned header
    vault.json      snapshot of the spendable checks and receipts

Recovery replays ``ledger.jsonl``; the snapshot is rewritten after each
operation for inspection and is never trusted over the ledger.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Callable, Iterable

from .checks import Check, Payload, is_receipt, match_names, return_state, verify_chain, display_check
from .signing import Identity, fingerprint, random_tracking

__all__ = [
    "Bank",
    "BankError",
    "PreferenceRow",
    "Finding",
    "audit",
    "parse_preferences",
    "total_by_minter",
]

LEDGER_HEADER = {"format": "egg-ledger", "version": 1}
VAULT_FORMAT = {"format": "egg-vault", "version": 1}
DEFAULT_LIFETIME = timedelta(days=365)


class BankError(Exception):
    pass


@dataclass(frozen=True)
class PreferenceRow:
    pattern: str
    weight: Decimal

    def __post_init__(self):
        if not self.weight.is_finite() or self.weight <= 0:
            raise ValueError("preference weight must be positive")


def parse_preferences(text: str) -> list[PreferenceRow]:
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        pattern, _, weight = line.rpartition(" ")
        if not pattern:
            raise ValueError(f"preference line needs a pattern and a weight: {line!r}")
        try:
            value = Decimal(weight)
        except InvalidOperation as exc:
            raise ValueError(f"bad preference weight {weight!r}") from exc
        match_names(pattern.strip(), [])  # raises on a malformed pattern
        rows.append(PreferenceRow(pattern.strip(), value))
    return rows


def _now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


@dataclass(eq=False)
class Bank:
    identity: Identity
    preferences: list[PreferenceRow] = field(default_factory=list)
    directory: dict[bytes, str] = field(default_factory=dict)
    clock: Callable[[], datetime] = _now
    tracking: Callable[[], str] = random_tracking
    path: Path | None = None

    def __post_init__(self):
        self.vault: dict[bytes, Check] = {}
        self.receipts: dict[bytes, Check] = {}
        self.earned: dict[bytes, Decimal] = {}
        self.ledger: list[dict] = []
        self._issued: set[str] = set()
        self._received: set[bytes] = set()  # every check ever deposited, to refuse replays
        self._lock = threading.RLock()
        self.directory.setdefault(self.identity.public_key, self.identity.name)

    @property
    def key(self) -> bytes:
        return self.identity.public_key

    @property
    def scheme(self):
        return self.identity.scheme

    def name_of(self, key: bytes) -> str:
        return self.directory.get(key) or fingerprint(key)

    def display(self, c: Check, show_date: bool = False) -> str:
        return display_check(c, self.name_of, show_date=show_date)

    # -- bookkeeping ------------------------------------------------------
    def _fresh_tracking(self) -> str:
        for _ in range(100):
            t = self.tracking()
            if t not in self._issued:
                self._issued.add(t)
                return t
        raise BankError("could not allocate a fresh tracking number")

    def _record(self, op: str, **info) -> None:
        entry = {"op": op, "at": self.clock().strftime("%Y-%m-%dT%H:%M:%SZ")}
        entry.update({k: (v.hex() if isinstance(v, Check) else str(v) if isinstance(v, Decimal) else v)
                      for k, v in info.items()})
        self.ledger.append(entry)
        if self.path is not None:
            with open(self.path / "ledger.jsonl", "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
            self._write_snapshot()

    def _store(self, c: Check) -> None:
        (self.receipts if is_receipt(c) else self.vault)[c.to_bytes()] = c

    def _take(self, c: Check) -> None:
        b = c.to_bytes()
        if b not in self.vault:
            raise BankError("check is not in this vault")
        del self.vault[b]

    def _require_owned(self, c: Check) -> None:
        if c.owner != self.key:
            raise BankError(f"{self.name_of(self.key)} does not own this check")
        if c.to_bytes() not in self.vault:
            raise BankError("check is not in this vault")

    def _require_spendable(self, c: Check) -> None:
        if c.has_payment():
            raise BankError("a check carrying a payment may not be spent again")
        if c.payload.expires < self.clock():
            raise BankError("check has expired")

    def _layer(self, base: Check, amount: Decimal, recipient: bytes, payment: bool) -> Check:
        p = base.payload
        payload = Payload(amount, p.start, p.expires, self._fresh_tracking(), payment)
        return Check.sign_new(payload, recipient, self.identity, inner=base)

    def _deliver(self, c: Check) -> Check:
        if c.owner == self.key:
            self._store(c)
        return c

    # -- operations -------------------------------------------------------
    def mint(self, amount, recipient: bytes | None = None, start: datetime | None = None,
             expires: datetime | None = None, payment: bool = False) -> Check:
        amount = Decimal(amount)
        with self._lock:
            if not amount.is_finite() or amount <= 0:
                raise BankError("minted amount must be positive")
            if self.identity.private_key is None:
                raise BankError("minting needs the bank's private key")
            start = start or self.clock()
            expires = expires or start + DEFAULT_LIFETIME
            payload = Payload(amount, start, expires, self._fresh_tracking(), payment)
            c = Check.sign_new(payload, recipient or self.key, self.identity)
            self._record("mint", check=c, amount=amount)
            return self._deliver(c)

    def transfer_gift(self, c: Check, recipient: bytes) -> Check:
        with self._lock:
            self._require_owned(c)
            self._require_spendable(c)
            gift = self._layer(c, c.denomination, recipient, payment=False)
            self._take(c)
            self._record("give", spent=c, check=gift)
            return self._deliver(gift)

    def pay(self, c: Check, amount, recipient: bytes) -> tuple[Check, Check | None]:
        """Split ``c`` into a payment to ``recipient`` and self-given change."""
        amount = Decimal(amount)
        with self._lock:
            self._require_owned(c)
            self._require_spendable(c)
            if not amount.is_finite() or amount <= 0:
                raise BankError("payment must be positive")
            if amount > c.denomination:
                raise BankError(f"overdraft: paying {amount} from a check of {c.denomination}")
            payment = self._layer(c, amount, recipient, payment=True)
            rest = c.denomination - amount
            change = self._layer(c, rest, self.key, payment=False) if rest else None
            self._take(c)
            self._record("pay", spent=c, check=payment, change=change.hex() if change else None)
            if change is not None:
                self._store(change)
            self._deliver(payment)
            return payment, change

    def cash_and_return(self, c: Check) -> Check:
        """Record earnings for a payment and send the check one hop back."""
        with self._lock:
            self._require_owned(c)
            try:
                state = return_state(c)
            except ValueError as exc:
                raise BankError(str(exc)) from exc
            if state is None:
                raise BankError("only payments and their returns can be cashed")
            p, r = state
            if r == p + 1:
                raise BankError("check has already returned to its minter")
            layers = c.layers()
            previous = layers[p - r].signer
            if r == 0:
                minter = c.minted_by()
                self.earned[minter] = self.earned.get(minter, Decimal(0)) + c.denomination
            back = self._layer(c, c.denomination, previous, payment=False)
            self._take(c)
            self._record("return", spent=c, check=back, earned=str(c.denomination) if r == 0 else None)
            return self._deliver(back)

    def receive(self, c: Check) -> Check:
        """Accept a check sent to this bank into the vault."""
        with self._lock:
            if not verify_chain(c, self.scheme):
                raise BankError("check signatures do not verify")
            if c.owner != self.key:
                raise BankError("check is owned by someone else")
            b = c.to_bytes()
            if b in self._received:
                raise BankError("check already deposited")
            self._received.add(b)
            self._store(c)
            self._record("receive", check=c)
            return c

    def settle(self, c: Check) -> Check:
        """Receive ``c`` and, while it is in its return phase, keep sending it back."""
        self.receive(c)
        if return_state(c) is not None and not is_receipt(c):
            return self.cash_and_return(c)
        return c

    # -- preferences ------------------------------------------------------
    def payer_chain(self, c: Check) -> list[str]:
        """Names of the payer's currency: the chain without the final payment hop."""
        names = [self.name_of(k) for k in c.keys()]
        return names[:-1] if c.payload.payment else names

    def accepts(self, c: Check) -> Decimal | None:
        """Highest weight of a matching preference row, or None to refuse."""
        chain = self.payer_chain(c)
        weights = [row.weight for row in self.preferences if match_names(row.pattern, chain)]
        return max(weights) if weights else None

    def validate_payment(self, c: Check) -> str | None:
        """Return a reason to refuse ``c`` as a payment to this bank, or None."""
        if not verify_chain(c, self.scheme):
            return "payment signatures do not verify"
        if c.owner != self.key or not c.payload.payment:
            return "check is not a payment to this server"
        if c.to_bytes() in self._received:
            return "payment already presented"
        if c.payload.expires < self.clock():
            return "payment has expired"
        if self.accepts(c) is None:
            return "currency not accepted here"
        return None

    # -- inspection -------------------------------------------------------
    def balance(self) -> Decimal:
        return sum((c.denomination for c in self.vault.values() if not c.has_payment()), Decimal(0))

    def spendable(self) -> list[Check]:
        return sorted((c for c in self.vault.values() if not c.has_payment()), key=lambda c: c.to_bytes())

    def checks(self) -> list[Check]:
        return list(self.vault.values()) + list(self.receipts.values())

    # -- persistence ------------------------------------------------------
    @classmethod
    def create(cls, path, display_name: str, scheme=None, preferences: Iterable[PreferenceRow] = ()) -> Bank:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        identity = Identity.generate(display_name, *(scheme,) if scheme else ())
        identity.save(path / "key.json")
        (path / "ledger.jsonl").write_text(json.dumps(LEDGER_HEADER) + "\n")
        bank = cls(identity, list(preferences), path=path)
        bank.save_preferences()
        bank._write_snapshot()
        return bank

    @classmethod
    def open(cls, path, directory: dict[bytes, str] | None = None) -> Bank:
        path = Path(path)
        identity = Identity.load(path / "key.json")
        prefs = path / "prefs.txt"
        rows = parse_preferences(prefs.read_text()) if prefs.exists() else []
        bank = cls(identity, rows, dict(directory or {}))
        bank._replay(path / "ledger.jsonl")
        bank.path = path
        return bank

    def save_preferences(self) -> None:
        if self.path is not None:
            lines = ["# egg preferences v1: <currency pattern> <weight>"]
            lines += [f"{r.pattern} {r.weight}" for r in self.preferences]
            (self.path / "prefs.txt").write_text("\n".join(lines) + "\n")

    def _replay(self, ledger: Path) -> None:
        lines = ledger.read_text(encoding="utf-8").splitlines()
        if not lines or json.loads(lines[0]) != LEDGER_HEADER:
            raise BankError(f"{ledger}: missing or unsupported ledger header")
        for line in lines[1:]:
            if not line.strip():
                continue
            entry = json.loads(line)
            self.ledger.append(entry)
            if entry["op"] == "receive":
                self._received.add(bytes.fromhex(entry["check"]))
            for k in ("spent",):
                if entry.get(k):
                    self.vault.pop(bytes.fromhex(entry[k]), None)
            for k in ("check", "change"):
                if entry.get(k):
                    c = Check.from_hex(entry[k])
                    self._issued.add(c.tracking)
                    if c.owner == self.key:
                        self._store(c)
            if entry.get("earned"):
                c = Check.from_hex(entry["spent"])
                m = c.minted_by()
                self.earned[m] = self.earned.get(m, Decimal(0)) + Decimal(entry["earned"])

    def _write_snapshot(self) -> None:
        if self.path is None:
            return
        snap = dict(VAULT_FORMAT)
        snap["vault"] = sorted(c.hex() for c in self.vault.values())
        snap["receipts"] = sorted(c.hex() for c in self.receipts.values())
        snap["ledger_entries"] = len(self.ledger)
        tmp = self.path / "vault.json.tmp"
        tmp.write_text(json.dumps(snap, indent=1) + "\n")
        tmp.replace(self.path / "vault.json")


def total_by_minter(checks: Iterable[Check]) -> dict[bytes, Decimal]:
    totals: dict[bytes, Decimal] = {}
    for c in checks:
        m = c.minted_by()
        totals[m] = totals.get(m, Decimal(0)) + c.denomination
    return totals


# -- audit ---------------------------------------------------------------------

@dataclass(frozen=True)
class Finding:
    kind: str  # duplicate-tracking | conservation | respent-payment | bad-signature
    tracking: str
    detail: str


def audit(checks: Iterable[Check], scheme=None) -> list[Finding]:
    """Look for rule violations among receipts and vault contents.

    Every layer of every check is collected; a layer's children are the
    distinct layers built directly on it.  Honest banks give a spendable
    layer at most one payment and one non-payment child whose values sum to
    at most its own, and a payment or return layer exactly one return child.
    """
    layers: dict[bytes, Check] = {}
    findings: list[Finding] = []
    for c in checks:
        if scheme is not None and not verify_chain(c, scheme):
            findings.append(Finding("bad-signature", c.tracking, "signature chain does not verify"))
        for layer in c.layers():
            layers[layer.to_bytes()] = layer

    by_tracking: dict[str, set[bytes]] = {}
    children: dict[bytes, list[Check]] = {}
    for b, layer in layers.items():
        by_tracking.setdefault(layer.tracking, set()).add(b)
        if layer.inner is not None:
            children.setdefault(layer.inner.to_bytes(), []).append(layer)

    for t, group in sorted(by_tracking.items()):
        if len(group) > 1:
            findings.append(Finding("duplicate-tracking", t, f"{len(group)} distinct layers share it"))

    for b, kids in sorted(children.items()):
        parent = layers[b]
        in_return = parent.has_payment()
        if in_return:
            if len(kids) > 1:
                findings.append(Finding("duplicate-tracking", parent.tracking,
                                        f"payment returned {len(kids)} times"))
            for k in kids:
                if k.payload.payment:
                    findings.append(Finding("respent-payment", parent.tracking, "payment used for another payment"))
                else:
                    try:
                        return_state(k)
                    except ValueError as exc:
                        findings.append(Finding("respent-payment", parent.tracking, str(exc)))
            continue
        paid = [k for k in kids if k.payload.payment]
        other = [k for k in kids if not k.payload.payment]
        if len(paid) > 1 or len(other) > 1:
            findings.append(Finding("duplicate-tracking", parent.tracking,
                                    f"spent {len(kids)} times"))
        total = sum((k.denomination for k in kids), Decimal(0))
        if total > parent.denomination:
            findings.append(Finding("conservation", parent.tracking,
                                    f"children total {total} exceeds {parent.denomination}"))
    return findings
