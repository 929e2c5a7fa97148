"""EHR application logic executed by endorsing peers.

Every write function is a pure function of (caller, state snapshot, args)
returning a :class:`Proposal`. Name and address go to the private
collection; only their salted hash enters the public write path. Salts and
record ids come from the client layer so that execution stays deterministic.
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass
from typing import Mapping, Optional

from .encoding import DecodeError, pack, unpack
from .errors import (
    AccessDeniedError,
    DuplicateRecordError,
    IntegrityError,
    LedgerError,
    NotFoundError,
    PurgedError,
)
from .ledger.model import PrivateWrite, ReadItem, WriteItem
from .ledger.private import CollectionPolicy, PrivateStore, private_anchor
from .ledger.state import WorldState

RECORD_PREFIX = "rec/"
PRIVATE_FIELDS = ("name", "address")
PUBLIC_FIELDS = ("country", "date_of_birth", "test")
DEFAULT_COLLECTION = CollectionPolicy("org1-private", frozenset({"Healthcenter"}))

_JSON_NAMES = {"id": "id", "name": "name", "address": "address", "country": "country",
               "date_of_birth": "dateOfBirth", "test": "test"}


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()


def _check_date(value: str) -> None:
    try:
        datetime.date.fromisoformat(value)
    except (TypeError, ValueError):
        raise ValueError(f"date_of_birth must be an ISO-8601 date, got {value!r}") from None


@dataclass(frozen=True)
class EHRRecord:
    id: str
    name: str
    address: str
    country: str
    date_of_birth: str
    test: str

    def validate(self) -> None:
        for f in _JSON_NAMES:
            v = getattr(self, f)
            if not isinstance(v, str) or not v:
                raise ValueError(f"record field {f!r} must be a non-empty string")
        _check_date(self.date_of_birth)

    def public_view(self) -> "PublicRecordView":
        return PublicRecordView(self.id, self.country, self.date_of_birth, self.test)

    def to_json(self) -> dict:
        return {_JSON_NAMES[f]: getattr(self, f) for f in _JSON_NAMES}

    @classmethod
    def from_json(cls, obj: Mapping) -> "EHRRecord":
        missing = [j for j in _JSON_NAMES.values() if j not in obj]
        if missing:
            raise ValueError(f"record is missing fields {missing}")
        extra = set(obj) - set(_JSON_NAMES.values())
        if extra:
            raise ValueError(f"unknown record fields {sorted(extra)}")
        return cls(**{f: obj[j] for f, j in _JSON_NAMES.items()})


@dataclass(frozen=True)
class PublicRecordView:
    id: str
    country: str
    date_of_birth: str
    test: str

    def to_json(self) -> dict:
        return {"id": self.id, "country": self.country, "dateOfBirth": self.date_of_birth,
                "test": self.test}

    def to_bytes(self) -> bytes:
        return _canonical_json(self.to_json())

    @classmethod
    def from_bytes(cls, data: bytes) -> "PublicRecordView":
        obj = json.loads(data)
        return cls(obj["id"], obj["country"], obj["dateOfBirth"], obj["test"])


@dataclass(frozen=True)
class CallerContext:
    org_name: str
    anonymous: bool = False

    def __post_init__(self):
        if not self.org_name:
            raise ValueError("caller context needs an organization")


@dataclass(frozen=True)
class PrivateData:
    """Plaintext handed to member peers beside the transaction, never inside it."""

    collection: str
    key: str
    plaintext: bytes
    salt: bytes


@dataclass(frozen=True)
class Proposal:
    read_set: tuple[ReadItem, ...] = ()
    write_set: tuple[WriteItem, ...] = ()
    private_writes: tuple[PrivateWrite, ...] = ()
    private_data: tuple[PrivateData, ...] = ()


def record_key(record_id: str) -> str:
    return RECORD_PREFIX + record_id


def private_key(record_id: str) -> str:
    return f"{record_id}/priv"


def encode_private_pair(name: str, address: str) -> bytes:
    return pack([name, address])


def decode_private_pair(data: bytes) -> tuple[str, str]:
    try:
        name, address = unpack(data)
    except (DecodeError, ValueError) as exc:
        raise IntegrityError("corrupt private value") from exc
    return name, address


def _tombstone(record_id: str) -> bytes:
    return _canonical_json({"deleted": True, "id": record_id})


def _live_record(state: WorldState, record_id: str):
    """Return (view, version) for a live record or raise NotFoundError."""
    item = state.get(record_key(record_id))
    if item is None:
        raise NotFoundError(record_id)
    value, version = item
    obj = json.loads(value)
    if obj.get("deleted"):
        raise NotFoundError(record_id)
    return PublicRecordView(obj["id"], obj["country"], obj["dateOfBirth"], obj["test"]), version


def _private_write(collection: CollectionPolicy, record_id: str, name: str, address: str,
                   salt: bytes) -> tuple[PrivateWrite, PrivateData]:
    plaintext = encode_private_pair(name, address)
    key = private_key(record_id)
    return (PrivateWrite(collection.name, key, private_anchor(plaintext, salt)),
            PrivateData(collection.name, key, plaintext, salt))


def create_record(ctx: CallerContext, state: WorldState, record: EHRRecord, salt: bytes,
                  collection: CollectionPolicy = DEFAULT_COLLECTION) -> Proposal:
    record.validate()
    key = record_key(record.id)
    if state.get(key) is not None:
        raise DuplicateRecordError(record.id)
    pw, pd = _private_write(collection, record.id, record.name, record.address, salt)
    return Proposal(
        read_set=(ReadItem(key, None),),
        write_set=(WriteItem(key, record.public_view().to_bytes()),),
        private_writes=(pw,),
        private_data=(pd,),
    )


def read_record(ctx: CallerContext, state: WorldState, record_id: str) -> PublicRecordView:
    return _live_record(state, record_id)[0]


def read_private(ctx: CallerContext, state: WorldState, store: Optional[PrivateStore],
                 record_id: str, collection: CollectionPolicy = DEFAULT_COLLECTION
                 ) -> tuple[str, str]:
    if not collection.is_member(ctx.org_name):
        raise AccessDeniedError(f"{ctx.org_name} is not a member of {collection.name}")
    key = private_key(record_id)
    anchor = state.anchor(collection.name, key)
    if anchor is None:
        raise NotFoundError(record_id)
    if store is None or key not in store:
        raise PurgedError(record_id)
    plaintext, salt = store.get(key)
    if private_anchor(plaintext, salt) != anchor[0]:
        raise IntegrityError(f"private value for {record_id} does not match its anchor")
    return decode_private_pair(plaintext)


def update_record(ctx: CallerContext, state: WorldState, store: Optional[PrivateStore],
                  record_id: str, changes: Mapping[str, str], salt: Optional[bytes] = None,
                  collection: CollectionPolicy = DEFAULT_COLLECTION) -> Proposal:
    if not changes:
        raise ValueError("no fields to update")
    unknown = set(changes) - set(PRIVATE_FIELDS) - set(PUBLIC_FIELDS)
    if unknown:
        raise ValueError(f"cannot update fields {sorted(unknown)}")
    for f, v in changes.items():
        if not isinstance(v, str) or not v:
            raise ValueError(f"field {f!r} must be a non-empty string")
    if "date_of_birth" in changes:
        _check_date(changes["date_of_birth"])

    view, version = _live_record(state, record_id)
    private_changes = {f: changes[f] for f in PRIVATE_FIELDS if f in changes}
    private_writes, private_data = (), ()
    if private_changes:
        if not collection.is_member(ctx.org_name):
            raise AccessDeniedError(f"{ctx.org_name} may not change private fields")
        if salt is None:
            raise ValueError("a fresh salt is required to rewrite private fields")
        if store is None:
            raise LedgerError("endorsing peer holds no private data for this collection")
        name, address = read_private(ctx, state, store, record_id, collection)
        name = private_changes.get("name", name)
        address = private_changes.get("address", address)
        pw, pd = _private_write(collection, record_id, name, address, salt)
        private_writes, private_data = (pw,), (pd,)

    new_view = PublicRecordView(
        view.id,
        changes.get("country", view.country),
        changes.get("date_of_birth", view.date_of_birth),
        changes.get("test", view.test),
    )
    key = record_key(record_id)
    # The public key is always rewritten so concurrent updates conflict under MVCC.
    return Proposal(
        read_set=(ReadItem(key, version),),
        write_set=(WriteItem(key, new_view.to_bytes()),),
        private_writes=private_writes,
        private_data=private_data,
    )


def delete_record(ctx: CallerContext, state: WorldState, record_id: str,
                  collection: CollectionPolicy = DEFAULT_COLLECTION) -> Proposal:
    """Erase a record: purge the private pair and tombstone the public view.

    Country and date of birth are quasi-identifiers, so the public view is
    replaced as well; the salted anchor and all past blocks are kept.
    """
    _, version = _live_record(state, record_id)
    key = record_key(record_id)
    return Proposal(
        read_set=(ReadItem(key, version),),
        write_set=(WriteItem(key, _tombstone(record_id)),),
        private_writes=(PrivateWrite(collection.name, private_key(record_id), None),),
    )


WRITE_FUNCTIONS = ("create", "update", "delete")
QUERY_FUNCTIONS = ("read", "read-private")


def invoke(function: str, ctx: CallerContext, state: WorldState, store: Optional[PrivateStore],
           args: Mapping, transient: Mapping, collection: CollectionPolicy = DEFAULT_COLLECTION):
    """Dispatch a chaincode call by name.

    ``args`` holds public arguments; ``transient`` holds private fields and
    the salt, which never enter the transaction.
    """
    if function == "create":
        record = EHRRecord(
            id=args.get("id", ""), name=transient.get("name", ""),
            address=transient.get("address", ""), country=args.get("country", ""),
            date_of_birth=args.get("date_of_birth", ""), test=args.get("test", ""),
        )
        return create_record(ctx, state, record, transient["salt"], collection)
    if function == "update":
        changes = {k: v for k, v in args.items() if k != "id"}
        changes.update({k: transient[k] for k in PRIVATE_FIELDS if k in transient})
        return update_record(ctx, state, store, args["id"], changes, transient.get("salt"),
                             collection)
    if function == "delete":
        return delete_record(ctx, state, args["id"], collection)
    if function == "read":
        return read_record(ctx, state, args["id"])
    if function == "read-private":
        return read_private(ctx, state, store, args["id"], collection)
    raise ValueError(f"unknown chaincode function {function!r}")
