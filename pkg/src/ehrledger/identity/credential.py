"""Anonymous credentials with selective disclosure and unlinkable showings.

Construction (additive notation over a prime-order group of order n):

* Public bases ``g0, h0, h_1..h_L`` and the issuer element ``X = x*G``.
* A credential on attribute scalars ``m_i`` with holder blinding ``s`` is the
  Pedersen-style commitment ``B = g0 + s*h0 + sum(m_i*h_i)`` together with
  ``A = B / (x + e)`` for a fresh issuer scalar ``e``.  The issuer attaches a
  Chaum-Pedersen proof that ``x*A = B - e*A`` uses the same ``x`` as ``X``,
  so holders check their credential against public data only.
* A presentation re-randomizes ``A' = r1*A``, publishes ``Abar = x*A'``
  (computed by the holder as ``r1*B - e*A'``) and ``d = r1*B - r2*h0``, and
  proves with a Fiat-Shamir Schnorr proof knowledge of ``e, r2, r3 = 1/r1,
  s' = s - r2*r3`` and the hidden attributes such that

      Abar - d       = -e*A' + r2*h0
      g0 + sum_R m_i*h_i = r3*d - s'*h0 - sum_hidden m_i*h_i

Without a pairing nobody can test ``Abar == x*A'`` from ``X`` alone, so
verification takes a :class:`VerifierKey` holding ``x``. Validators in the
network are provisioned with it by the issuer.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

from ..config import digest, tagged_digest
from ..encoding import DecodeError, pack, unpack
from ..errors import (
    MalformedPresentationError,
    NonceMismatchError,
    ProofInvalidError,
)
from . import group
from .group import GENERATOR, IDENTITY, ORDER, Point

DEFAULT_ATTRIBUTES = ("organization", "role", "enrollment-id", "affiliation")

_system_rng = secrets.SystemRandom()

_CHALLENGE_TAG = "ehrledger/presentation/v1"
_ISSUE_TAG = "ehrledger/issuance/v1"
_ATTR_TAG = "ehrledger/attribute/v1"


def attribute_scalar(value: str) -> int:
    return group.hash_to_scalar(_ATTR_TAG, value.encode("utf-8"))


@dataclass(frozen=True, eq=False)
class IssuerPublicKey:
    attribute_count: int
    seed: bytes
    X: Point

    @cached_property
    def g0(self) -> Point:
        return group.hash_to_point("ehrledger/g0", self.seed)

    @cached_property
    def h0(self) -> Point:
        return group.hash_to_point("ehrledger/h0", self.seed)

    @cached_property
    def bases(self) -> tuple[Point, ...]:
        return tuple(
            group.hash_to_point("ehrledger/h", self.seed + i.to_bytes(4, "big"))
            for i in range(self.attribute_count)
        )

    @cached_property
    def encoded(self) -> bytes:
        return pack([self.attribute_count, self.seed, group.encode_point(self.X)])

    def __eq__(self, other) -> bool:
        return isinstance(other, IssuerPublicKey) and self.encoded == other.encoded

    def __hash__(self) -> int:
        return hash(self.encoded)

    def to_json(self) -> dict:
        return {
            "attributeCount": self.attribute_count,
            "seed": self.seed.hex(),
            "X": group.encode_point(self.X).hex(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "IssuerPublicKey":
        return cls(int(obj["attributeCount"]), bytes.fromhex(obj["seed"]),
                   group.decode_point(bytes.fromhex(obj["X"])))


@dataclass(frozen=True)
class VerifierKey:
    public: IssuerPublicKey
    secret: int


@dataclass(frozen=True)
class IssuerKey:
    attribute_count: int
    secret: int
    public: IssuerPublicKey

    @property
    def verifier_key(self) -> VerifierKey:
        return VerifierKey(self.public, self.secret)


@dataclass(frozen=True)
class AnonCredential:
    issuer: IssuerPublicKey
    attributes: tuple[str, ...]
    commitment: Point
    blinding: int
    signature: Point
    exponent: int
    issuer_proof: tuple[int, int]

    @property
    def attribute_scalars(self) -> tuple[int, ...]:
        return tuple(attribute_scalar(a) for a in self.attributes)


@dataclass(frozen=True)
class Presentation:
    randomized_signature: Point
    signature_image: Point
    randomized_commitment: Point
    revealed: tuple[tuple[int, str], ...]
    challenge: int
    responses: tuple[int, ...]
    nonce_binding: bytes

    @property
    def revealed_map(self) -> dict[int, str]:
        return dict(self.revealed)

    def to_fields(self) -> list:
        return [
            group.encode_point(self.randomized_signature),
            group.encode_point(self.signature_image),
            group.encode_point(self.randomized_commitment),
            [[i, v] for i, v in self.revealed],
            group.encode_scalar(self.challenge),
            [group.encode_scalar(r) for r in self.responses],
            self.nonce_binding,
        ]

    @classmethod
    def from_fields(cls, fields) -> "Presentation":
        try:
            a1, abar, d, revealed, c, responses, nb = fields
            return cls(
                group.decode_point(bytes(a1)),
                group.decode_point(bytes(abar)),
                group.decode_point(bytes(d)),
                tuple((int(i), str(v)) for i, v in revealed),
                group.decode_scalar(bytes(c)),
                tuple(group.decode_scalar(bytes(r)) for r in responses),
                bytes(nb),
            )
        except (ValueError, TypeError, AssertionError) as exc:
            raise MalformedPresentationError(str(exc)) from exc

    def to_bytes(self) -> bytes:
        return pack(self.to_fields())

    @classmethod
    def from_bytes(cls, data: bytes) -> "Presentation":
        try:
            fields = unpack(data)
        except DecodeError as exc:
            raise MalformedPresentationError(str(exc)) from exc
        return cls.from_fields(fields)

    def to_json(self) -> dict:
        return {
            "randomizedSignature": group.encode_point(self.randomized_signature).hex(),
            "signatureImage": group.encode_point(self.signature_image).hex(),
            "randomizedCommitment": group.encode_point(self.randomized_commitment).hex(),
            "revealed": {str(i): v for i, v in self.revealed},
            "challenge": group.encode_scalar(self.challenge).hex(),
            "responses": [group.encode_scalar(r).hex() for r in self.responses],
            "nonceBinding": self.nonce_binding.hex(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Presentation":
        try:
            return cls(
                group.decode_point(bytes.fromhex(obj["randomizedSignature"])),
                group.decode_point(bytes.fromhex(obj["signatureImage"])),
                group.decode_point(bytes.fromhex(obj["randomizedCommitment"])),
                tuple(sorted((int(i), v) for i, v in obj["revealed"].items())),
                group.decode_scalar(bytes.fromhex(obj["challenge"])),
                tuple(group.decode_scalar(bytes.fromhex(r)) for r in obj["responses"]),
                bytes.fromhex(obj["nonceBinding"]),
            )
        except (KeyError, ValueError, TypeError, AssertionError) as exc:
            raise MalformedPresentationError(str(exc)) from exc


def credential_to_json(cred: AnonCredential) -> dict:
    return {
        "issuer": cred.issuer.to_json(),
        "attributes": list(cred.attributes),
        "commitment": group.encode_point(cred.commitment).hex(),
        "blinding": group.encode_scalar(cred.blinding).hex(),
        "signature": group.encode_point(cred.signature).hex(),
        "exponent": group.encode_scalar(cred.exponent).hex(),
        "issuerProof": [group.encode_scalar(v).hex() for v in cred.issuer_proof],
    }


def credential_from_json(obj: dict) -> AnonCredential:
    c, z = (group.decode_scalar(bytes.fromhex(v)) for v in obj["issuerProof"])
    return AnonCredential(
        IssuerPublicKey.from_json(obj["issuer"]),
        tuple(obj["attributes"]),
        group.decode_point(bytes.fromhex(obj["commitment"])),
        group.decode_scalar(bytes.fromhex(obj["blinding"])),
        group.decode_point(bytes.fromhex(obj["signature"])),
        group.decode_scalar(bytes.fromhex(obj["exponent"])),
        (c, z),
    )


def issuer_setup(attribute_count: int = len(DEFAULT_ATTRIBUTES), rng=None) -> IssuerKey:
    if attribute_count < 1:
        raise ValueError("attribute_count must be >= 1")
    rng = rng or _system_rng
    x = group.random_scalar(rng)
    public = IssuerPublicKey(attribute_count, rng.randbytes(16), GENERATOR * x)
    return IssuerKey(attribute_count, x, public)


def _commit(pub: IssuerPublicKey, blinding: int, scalars: Iterable[int]) -> Point:
    acc = pub.g0 + pub.h0 * blinding
    for m, h in zip(scalars, pub.bases):
        acc = acc + h * m
    return acc


def _issuance_challenge(pub: IssuerPublicKey, a: Point, y: Point, t1: Point, t2: Point) -> int:
    data = pack([pub.encoded] + [group.encode_point(p) for p in (a, y, t1, t2)])
    return group.hash_to_scalar(_ISSUE_TAG, data)


def issue_credential(issuer: IssuerKey, attributes: list[str], rng=None) -> AnonCredential:
    if len(attributes) != issuer.attribute_count:
        raise ValueError(
            f"expected {issuer.attribute_count} attributes, got {len(attributes)}"
        )
    rng = rng or _system_rng
    pub = issuer.public
    attributes = tuple(str(a) for a in attributes)
    scalars = [attribute_scalar(a) for a in attributes]
    s = group.random_scalar(rng)
    b = _commit(pub, s, scalars)
    while True:
        e = group.random_scalar(rng)
        if (issuer.secret + e) % ORDER:
            break
    a = b * pow(issuer.secret + e, -1, ORDER)
    # Chaum-Pedersen: log_G X == log_A (B - e*A)
    y = b + (-(a * e))
    k = group.random_scalar(rng)
    c = _issuance_challenge(pub, a, y, GENERATOR * k, a * k)
    z = (k + c * issuer.secret) % ORDER
    return AnonCredential(pub, attributes, b, s, a, e, (c, z))


def verify_credential(cred: AnonCredential, issuer_public: IssuerPublicKey) -> bool:
    """Holder-side check of an issued credential using public data only."""
    pub = issuer_public
    if cred.issuer != pub or len(cred.attributes) != pub.attribute_count:
        return False
    if cred.signature == IDENTITY:
        return False
    if _commit(pub, cred.blinding, cred.attribute_scalars) != cred.commitment:
        return False
    c, z = cred.issuer_proof
    a = cred.signature
    y = cred.commitment + (-(a * cred.exponent))
    t1 = GENERATOR * z + (-(pub.X * c))
    t2 = a * z + (-(y * c))
    return _issuance_challenge(pub, a, y, t1, t2) == c


def _presentation_challenge(pub: IssuerPublicKey, a1: Point, abar: Point, d: Point,
                            t1: Point, t2: Point, revealed, nonce_binding: bytes) -> int:
    data = pack([
        pub.encoded,
        group.encode_point(d),
        [[i, v] for i, v in revealed],
        nonce_binding,
        group.encode_point(a1),
        group.encode_point(abar),
        group.encode_point(t1),
        group.encode_point(t2),
    ])
    return group.hash_to_scalar(_CHALLENGE_TAG, data)


def nonce_digest(nonce: bytes) -> bytes:
    return tagged_digest("ehrledger/nonce", nonce)


def present(cred: AnonCredential, reveal: Iterable[int], nonce: bytes, rng=None) -> Presentation:
    """Prove possession of ``cred`` disclosing only the attributes in ``reveal``."""
    pub = cred.issuer
    L = pub.attribute_count
    reveal = sorted(set(reveal))
    for i in reveal:
        if not 0 <= i < L:
            raise ValueError(f"reveal index {i} out of range 0..{L - 1}")
    if not nonce:
        raise ValueError("nonce must be non-empty")
    rng = rng or _system_rng
    hidden = [i for i in range(L) if i not in reveal]
    scalars = cred.attribute_scalars
    e, s, b = cred.exponent, cred.blinding, cred.commitment

    r1 = group.random_scalar(rng)
    r2 = group.random_scalar(rng)
    r3 = pow(r1, -1, ORDER)
    a1 = cred.signature * r1
    b_r1 = b * r1
    abar = b_r1 + (-(a1 * e))
    d = b_r1 + (-(pub.h0 * r2))
    s_prime = (s - r2 * r3) % ORDER

    secrets_ = [e, r2, r3, s_prime] + [scalars[i] for i in hidden]
    blinds = [group.random_scalar(rng) for _ in secrets_]
    be, br2, br3, bs = blinds[:4]
    t1 = a1 * (-be % ORDER) + pub.h0 * br2
    t2 = d * br3 + pub.h0 * (-bs % ORDER)
    for bm, i in zip(blinds[4:], hidden):
        t2 = t2 + pub.bases[i] * (-bm % ORDER)

    revealed = tuple((i, cred.attributes[i]) for i in reveal)
    nb = nonce_digest(nonce)
    c = _presentation_challenge(pub, a1, abar, d, t1, t2, revealed, nb)
    responses = tuple((bl + c * sec) % ORDER for bl, sec in zip(blinds, secrets_))
    return Presentation(a1, abar, d, revealed, c, responses, nb)


def verify_presentation(pres: Presentation, verifier_key: VerifierKey,
                        nonce: bytes) -> dict[int, str]:
    """Return the disclosed attributes, or raise if the presentation is not valid."""
    pub = verifier_key.public
    L = pub.attribute_count
    try:
        revealed = tuple((int(i), str(v)) for i, v in pres.revealed)
        indices = [i for i, _ in revealed]
        if indices != sorted(set(indices)) or any(not 0 <= i < L for i in indices):
            raise MalformedPresentationError("bad revealed index set")
        hidden = [i for i in range(L) if i not in indices]
        if len(pres.responses) != 4 + len(hidden):
            raise MalformedPresentationError("wrong number of responses")
        if any(not 0 <= r < ORDER for r in (pres.challenge, *pres.responses)):
            raise MalformedPresentationError("scalar out of range")
        if not isinstance(pres.nonce_binding, bytes):
            raise MalformedPresentationError("bad nonce binding")
    except (TypeError, ValueError, AttributeError) as exc:
        raise MalformedPresentationError(str(exc)) from exc

    if nonce_digest(nonce) != pres.nonce_binding:
        raise NonceMismatchError("presentation is bound to a different nonce")

    a1, abar, d = pres.randomized_signature, pres.signature_image, pres.randomized_commitment
    if a1 == IDENTITY or a1 * verifier_key.secret != abar:
        raise ProofInvalidError("signature image does not match issuer key")

    c = pres.challenge
    ze, zr2, zr3, zs = pres.responses[:4]
    t1 = a1 * (-ze % ORDER) + pub.h0 * zr2 + (abar + (-d)) * (-c % ORDER)
    lhs = pub.g0
    for i, v in revealed:
        lhs = lhs + pub.bases[i] * attribute_scalar(v)
    t2 = d * zr3 + pub.h0 * (-zs % ORDER) + lhs * (-c % ORDER)
    for zm, i in zip(pres.responses[4:], hidden):
        t2 = t2 + pub.bases[i] * (-zm % ORDER)

    if _presentation_challenge(pub, a1, abar, d, t1, t2, revealed, pres.nonce_binding) != c:
        raise ProofInvalidError("challenge mismatch")
    return dict(revealed)


def presentation_digest(pres: Presentation) -> bytes:
    return digest(pres.to_bytes())
