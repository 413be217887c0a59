"""Signature schemes and identities."""
from __future__ import annotations

import hashlib
import hmac
import json
import os
import secrets
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.serialization import Encoding, PrivateFormat, PublicFormat, NoEncryption

__all__ = ["SignatureScheme", "Ed25519Scheme", "MockScheme", "Identity", "ED25519", "MOCK", "fingerprint"]


class SignatureScheme(Protocol):
    name: str

    def generate(self) -> tuple[bytes, bytes]:
        """Return ``(private_key, public_key)``."""

    def public_of(self, private_key: bytes) -> bytes: ...

    def sign(self, private_key: bytes, message: bytes) -> bytes: ...

    def verify(self, public_key: bytes, message: bytes, signature: bytes) -> bool: ...


class Ed25519Scheme:
    name = "ed25519"

    def generate(self) -> tuple[bytes, bytes]:
        key = Ed25519PrivateKey.generate()
        private = key.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption())
        return private, self.public_of(private)

    def public_of(self, private_key: bytes) -> bytes:
        key = Ed25519PrivateKey.from_private_bytes(private_key)
        return key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)

    def sign(self, private_key: bytes, message: bytes) -> bytes:
        return Ed25519PrivateKey.from_private_bytes(private_key).sign(message)

    def verify(self, public_key: bytes, message: bytes, signature: bytes) -> bool:
        try:
            Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        except (InvalidSignature, ValueError):
            return False
        return True


class MockScheme:
    """Deterministic and insecure: the public key is the private key.

    For tests only; it lets signatures be reproduced byte for byte.
    """

    name = "mock"

    def __init__(self, seed: int = 0):
        self._counter = seed

    def generate(self) -> tuple[bytes, bytes]:
        self._counter += 1
        private = hashlib.sha256(f"mock-key-{self._counter}".encode()).digest()[:16]
        return private, private

    def public_of(self, private_key: bytes) -> bytes:
        return private_key

    def sign(self, private_key: bytes, message: bytes) -> bytes:
        return hmac.new(private_key, message, hashlib.sha256).digest()

    def verify(self, public_key: bytes, message: bytes, signature: bytes) -> bool:
        return hmac.compare_digest(self.sign(public_key, message), signature)


ED25519 = Ed25519Scheme()
MOCK = MockScheme()
SCHEMES = {"ed25519": ED25519, "mock": MOCK}


def fingerprint(public_key: bytes) -> str:
    return "k" + hashlib.sha256(public_key).hexdigest()[:8]


@dataclass(frozen=True)
class Identity:
    public_key: bytes
    private_key: bytes | None = None
    display_name: str = ""
    scheme: SignatureScheme = ED25519

    @classmethod
    def generate(cls, display_name: str, scheme: SignatureScheme = ED25519) -> Identity:
        private, public = scheme.generate()
        return cls(public, private, display_name, scheme)

    @property
    def name(self) -> str:
        return self.display_name or fingerprint(self.public_key)

    def sign(self, message: bytes) -> bytes:
        if self.private_key is None:
            raise PermissionError(f"no private key for {self.name}")
        return self.scheme.sign(self.private_key, message)

    def public(self) -> Identity:
        return Identity(self.public_key, None, self.display_name, self.scheme)

    # -- key files --------------------------------------------------------
    def save(self, path: str | os.PathLike) -> None:
        record = {
            "format": "egg-key",
            "version": 1,
            "name": self.display_name,
            "scheme": self.scheme.name,
            "public": self.public_key.hex(),
        }
        if self.private_key is not None:
            record["private"] = self.private_key.hex()
        p = Path(path)
        p.write_text(json.dumps(record, indent=2) + "\n")
        if self.private_key is not None:
            os.chmod(p, 0o600)

    @classmethod
    def load(cls, path: str | os.PathLike) -> Identity:
        record = json.loads(Path(path).read_text())
        if record.get("format") != "egg-key" or record.get("version") != 1:
            raise ValueError(f"{path}: not an egg key file")
        scheme = SCHEMES[record.get("scheme", "ed25519")]
        private = bytes.fromhex(record["private"]) if "private" in record else None
        return cls(bytes.fromhex(record["public"]), private, record.get("name", ""), scheme)


def random_tracking() -> str:
    return secrets.token_hex(12)
