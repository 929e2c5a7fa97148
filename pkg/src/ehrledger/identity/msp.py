"""Per-organization certificate authorities issuing signature-based identities.

Identities are abstract signed tuples (subject, org, role, public key), not
X.509 documents. Signatures are Ed25519.
"""

from __future__ import annotations

import enum
import secrets
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from ..encoding import pack

_system_rng = secrets.SystemRandom()


class Role(str, enum.Enum):
    CLIENT = "client"
    PEER = "peer"
    ORDERER = "orderer"
    ADMIN = "admin"


def _new_key(rng) -> Ed25519PrivateKey:
    rng = rng or _system_rng
    return Ed25519PrivateKey.from_private_bytes(rng.randbytes(32))


def public_bytes(key: Ed25519PrivateKey) -> bytes:
    return key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)


def verify_signature(public_key: bytes, signature: bytes, message: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
    except (InvalidSignature, ValueError, TypeError):
        return False
    return True


@dataclass(frozen=True)
class OrgCA:
    org_name: str
    signing_key: Ed25519PrivateKey
    public_key: bytes

    def sign(self, message: bytes) -> bytes:
        return self.signing_key.sign(message)


@dataclass(frozen=True)
class StandardIdentity:
    subject: str
    org_name: str
    role: Role
    public_key: bytes
    ca_signature: bytes

    def tbs_bytes(self) -> bytes:
        """The identity tuple covered by the CA signature."""
        return identity_tuple(self.subject, self.org_name, self.role, self.public_key)

    def to_fields(self) -> list:
        return [self.subject, self.org_name, Role(self.role).value, self.public_key, self.ca_signature]

    @classmethod
    def from_fields(cls, fields) -> "StandardIdentity":
        subject, org, role, pk, sig = fields
        return cls(subject, org, Role(role), bytes(pk), bytes(sig))

    def to_json(self) -> dict:
        return {
            "subject": self.subject,
            "org": self.org_name,
            "role": Role(self.role).value,
            "publicKey": self.public_key.hex(),
            "caSignature": self.ca_signature.hex(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StandardIdentity":
        return cls(
            obj["subject"],
            obj["org"],
            Role(obj["role"]),
            bytes.fromhex(obj["publicKey"]),
            bytes.fromhex(obj["caSignature"]),
        )


@dataclass(frozen=True)
class Signer:
    """An enrolled identity together with its private signing key."""

    identity: StandardIdentity
    private_key: Ed25519PrivateKey

    @property
    def org_name(self) -> str:
        return self.identity.org_name

    def sign(self, message: bytes) -> bytes:
        return self.private_key.sign(message)


def identity_tuple(subject: str, org_name: str, role: Role, public_key: bytes) -> bytes:
    return pack(["standard-identity", subject, org_name, Role(role).value, public_key])


def setup_org_ca(org_name: str, rng=None) -> OrgCA:
    if not org_name:
        raise ValueError("org_name must be non-empty")
    key = _new_key(rng)
    return OrgCA(org_name, key, public_bytes(key))


def enroll_member(ca: OrgCA, subject: str, role: Role, public_key: bytes | None = None,
                  rng=None) -> StandardIdentity:
    """Issue a CA-signed identity. A fresh key is generated if none is given."""
    if not subject:
        raise ValueError("subject must be non-empty")
    role = Role(role)
    if public_key is None:
        public_key = public_bytes(_new_key(rng))
    sig = ca.sign(identity_tuple(subject, ca.org_name, role, public_key))
    return StandardIdentity(subject, ca.org_name, role, public_key, sig)


def enroll_signer(ca: OrgCA, subject: str, role: Role, rng=None) -> Signer:
    key = _new_key(rng)
    return Signer(enroll_member(ca, subject, role, public_bytes(key)), key)


def verify_member(identity: StandardIdentity, ca_public: bytes) -> bool:
    try:
        tbs = identity.tbs_bytes()
    except (ValueError, TypeError, AttributeError):
        return False
    return verify_signature(ca_public, identity.ca_signature, tbs)
