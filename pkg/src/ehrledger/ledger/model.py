"""Transactions and blocks, with their canonical encodings."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

from ..config import digest
from ..encoding import pack
from ..identity.credential import Presentation
from ..identity.msp import StandardIdentity

Version = tuple[int, int]  # (block number, tx index)


class ValidationFlag(str, enum.Enum):
    VALID = "valid"
    INVALID_ENDORSEMENT = "invalid_endorsement"
    INVALID_MVCC = "invalid_mvcc"


@dataclass(frozen=True)
class ReadItem:
    key: str
    version: Optional[Version]  # None: key was absent when read


@dataclass(frozen=True)
class WriteItem:
    key: str
    value: Optional[bytes]  # None: delete marker

    @property
    def is_delete(self) -> bool:
        return self.value is None


@dataclass(frozen=True)
class PrivateWrite:
    """Public trace of a private collection write.

    Carries only H(salt || plaintext); ``value_hash=None`` requests a purge
    of the plaintext while the existing anchor stays in place.
    """

    collection: str
    key: str
    value_hash: Optional[bytes]

    @property
    def is_purge(self) -> bool:
        return self.value_hash is None


@dataclass(frozen=True)
class Endorsement:
    endorser: StandardIdentity
    signature: bytes


Creator = Union[StandardIdentity, Presentation]


def _creator_fields(creator: Creator) -> list:
    if isinstance(creator, StandardIdentity):
        return ["standard", creator.to_fields()]
    if isinstance(creator, Presentation):
        return ["anonymous", creator.to_fields()]
    raise TypeError(f"unsupported creator {type(creator).__name__}")


def _creator_from_fields(fields) -> Creator:
    kind, body = fields
    if kind == "standard":
        return StandardIdentity.from_fields(body)
    if kind == "anonymous":
        return Presentation.from_fields(body)
    raise ValueError(f"unknown creator kind {kind!r}")


def proposal_digest(function: str, args: tuple[bytes, ...], nonce: bytes) -> bytes:
    """What a client signs (or binds its presentation to) before endorsement."""
    return digest(pack(["proposal", function, list(args), nonce]))


@dataclass(frozen=True)
class Transaction:
    tx_id: bytes
    function: str
    args: tuple[bytes, ...]
    nonce: bytes
    read_set: tuple[ReadItem, ...]
    write_set: tuple[WriteItem, ...]
    private_writes: tuple[PrivateWrite, ...]
    creator: Creator
    creator_signature: bytes
    endorsements: tuple[Endorsement, ...] = ()

    def body_fields(self) -> list:
        return [
            self.function,
            list(self.args),
            self.nonce,
            [[r.key, None if r.version is None else list(r.version)] for r in self.read_set],
            [[w.key, w.value] for w in self.write_set],
            [[p.collection, p.key, p.value_hash] for p in self.private_writes],
            _creator_fields(self.creator),
            self.creator_signature,
        ]

    def body_bytes(self) -> bytes:
        """Canonical encoding of every field except ``tx_id`` and endorsements."""
        return pack(self.body_fields())

    def compute_tx_id(self) -> bytes:
        return digest(self.body_bytes())

    @cached_property
    def body_digest(self) -> bytes:
        """Cached ``compute_tx_id()``; chain verification recomputes instead."""
        return self.compute_tx_id()

    @property
    def proposal_digest(self) -> bytes:
        return proposal_digest(self.function, self.args, self.nonce)

    def to_fields(self) -> list:
        return [
            self.tx_id,
            self.body_fields(),
            [[e.endorser.to_fields(), e.signature] for e in self.endorsements],
        ]

    @classmethod
    def from_fields(cls, fields) -> "Transaction":
        tx_id, body, endorsements = fields
        function, args, nonce, reads, writes, pwrites, creator, csig = body
        return cls(
            tx_id=bytes(tx_id),
            function=function,
            args=tuple(bytes(a) for a in args),
            nonce=bytes(nonce),
            read_set=tuple(ReadItem(k, None if v is None else (v[0], v[1])) for k, v in reads),
            write_set=tuple(WriteItem(k, None if v is None else bytes(v)) for k, v in writes),
            private_writes=tuple(
                PrivateWrite(c, k, None if h is None else bytes(h)) for c, k, h in pwrites
            ),
            creator=_creator_from_fields(creator),
            creator_signature=bytes(csig),
            endorsements=tuple(
                Endorsement(StandardIdentity.from_fields(ident), bytes(sig))
                for ident, sig in endorsements
            ),
        )

    def encode(self) -> bytes:
        return pack(self.to_fields())

    @cached_property
    def envelope_digest(self) -> bytes:
        """Digest of the full transaction including endorsements (cached)."""
        return digest(self.encode())


def build_transaction(function: str, args, nonce: bytes, read_set, write_set, private_writes,
                      creator: Creator, creator_signature: bytes) -> Transaction:
    """Assemble an unendorsed transaction with its ``tx_id`` filled in."""
    tx = Transaction(b"", function, tuple(args), nonce, tuple(read_set), tuple(write_set),
                     tuple(private_writes), creator, creator_signature)
    return dataclasses.replace(tx, tx_id=tx.compute_tx_id())


def compute_data_hash(transactions, fresh: bool = False) -> bytes:
    """Digest over the ordered (tx_id, envelope digest) pairs of a batch.

    ``fresh=True`` bypasses the per-transaction digest cache; chain
    verification uses it so that nothing cached can mask tampering.
    """
    entries = []
    for tx in transactions:
        env = digest(tx.encode()) if fresh else tx.envelope_digest
        entries.append([tx.tx_id, env])
    return digest(pack(["block-data", entries]))


@dataclass(frozen=True)
class Block:
    number: int
    prev_hash: bytes
    data_hash: bytes
    transactions: tuple[Transaction, ...] = ()
    validation_flags: tuple[ValidationFlag, ...] = field(default=())

    def header_fields(self) -> list:
        return [self.number, self.prev_hash, self.data_hash]

    def to_fields(self) -> list:
        return [
            self.header_fields(),
            [tx.to_fields() for tx in self.transactions],
            [ValidationFlag(f).value for f in self.validation_flags],
        ]

    @classmethod
    def from_fields(cls, fields) -> "Block":
        (number, prev_hash, data_hash), txs, flags = fields
        return cls(
            number,
            bytes(prev_hash),
            bytes(data_hash),
            tuple(Transaction.from_fields(t) for t in txs),
            tuple(ValidationFlag(f) for f in flags),
        )

    def encode(self) -> bytes:
        return pack(self.to_fields())
