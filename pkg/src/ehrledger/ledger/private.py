"""Private data collections: plaintext side stores with salted public anchors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from ..config import SALT_SIZE, digest
from ..encoding import pack
from ..errors import NotFoundError
from .state import WorldState


@dataclass(frozen=True)
class CollectionPolicy:
    name: str
    member_orgs: frozenset[str]
    lifetime: Optional[int] = None  # in blocks; None keeps entries forever

    def __post_init__(self):
        if not self.member_orgs:
            raise ValueError("collection needs at least one member organization")
        if self.lifetime is not None and self.lifetime < 0:
            raise ValueError("lifetime must be non-negative")

    def is_member(self, org_name: str) -> bool:
        return org_name in self.member_orgs


@dataclass
class PrivateStore:
    collection_name: str
    member_orgs: frozenset[str]
    entries: dict[str, tuple[bytes, bytes]] = field(default_factory=dict)

    @classmethod
    def for_policy(cls, policy: CollectionPolicy) -> "PrivateStore":
        return cls(policy.name, policy.member_orgs)

    def get(self, key: str) -> tuple[bytes, bytes]:
        try:
            return self.entries[key]
        except KeyError:
            raise NotFoundError(f"{self.collection_name}/{key}") from None

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def encode(self) -> bytes:
        return pack([self.collection_name, sorted(self.member_orgs),
                     [[k, p, s] for k, (p, s) in sorted(self.entries.items())]])


def private_anchor(plaintext: bytes, salt: bytes) -> bytes:
    return digest(salt + plaintext)


def put_private(store: PrivateStore, key: str, plaintext: bytes, salt: bytes) -> bytes:
    """Store ``plaintext`` under ``key`` and return its anchor H(salt || plaintext)."""
    if len(salt) != SALT_SIZE:
        raise ValueError(f"salt must be exactly {SALT_SIZE} bytes")
    store.entries[key] = (bytes(plaintext), bytes(salt))
    return private_anchor(plaintext, salt)


def purge_private(store: PrivateStore, key: str) -> None:
    """Erase plaintext and salt; anchors in the world state are not touched."""
    try:
        del store.entries[key]
    except KeyError:
        raise NotFoundError(f"{store.collection_name}/{key}") from None


def verify_private_anchor(plaintext: bytes, salt: bytes, anchor: bytes) -> bool:
    return len(salt) == SALT_SIZE and private_anchor(plaintext, salt) == anchor


def sweep_expired(state: WorldState, stores: Mapping[str, PrivateStore] | Iterable[PrivateStore],
                  policies: Iterable[CollectionPolicy], current_block: int) -> list[tuple[str, str]]:
    """Purge entries older than their collection lifetime.

    Age is ``current_block`` minus the block that wrote the entry's anchor;
    an entry is purged once its age strictly exceeds the lifetime.
    """
    if not isinstance(stores, Mapping):
        stores = {s.collection_name: s for s in stores}
    purged = []
    for policy in policies:
        store = stores.get(policy.name)
        if store is None or policy.lifetime is None:
            continue
        for key in sorted(store.entries):
            anchor = state.anchor(policy.name, key)
            if anchor is None:
                continue
            written_block = anchor[1][0]
            if current_block - written_block > policy.lifetime:
                purge_private(store, key)
                purged.append((policy.name, key))
    return purged
