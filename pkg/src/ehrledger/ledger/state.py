"""Versioned world state, MVCC validation and block commit."""

from __future__ import annotations

import json
from typing import Mapping, MutableMapping, Optional

from ..encoding import pack
from ..identity.msp import Role, verify_member, verify_signature
from .model import Block, Transaction, ValidationFlag, Version
from .policy import EndorsementPolicy


def endorsement_message(tx_id: bytes) -> bytes:
    return pack(["endorsement", tx_id])


class WorldState:
    """Public key/value state plus the anchors of private collection values."""

    def __init__(self):
        self.entries: dict[str, tuple[bytes, Version]] = {}
        self.private_anchors: dict[tuple[str, str], tuple[bytes, Version]] = {}
        self.height = 0

    def get(self, key: str) -> Optional[tuple[bytes, Version]]:
        return self.entries.get(key)

    def value(self, key: str) -> Optional[bytes]:
        item = self.entries.get(key)
        return None if item is None else item[0]

    def version(self, key: str) -> Optional[Version]:
        item = self.entries.get(key)
        return None if item is None else item[1]

    def anchor(self, collection: str, key: str) -> Optional[tuple[bytes, Version]]:
        return self.private_anchors.get((collection, key))

    def snapshot(self) -> dict:
        def text(v: bytes):
            try:
                return v.decode("utf-8")
            except UnicodeDecodeError:
                return {"hex": v.hex()}

        return {
            "height": self.height,
            "entries": {
                k: {"value": text(v), "version": list(ver)}
                for k, (v, ver) in sorted(self.entries.items())
            },
            "anchors": {
                f"{c}/{k}": {"hash": h.hex(), "version": list(ver)}
                for (c, k), (h, ver) in sorted(self.private_anchors.items())
            },
        }

    def snapshot_json(self) -> str:
        """Sorted JSON snapshot, byte-identical across peers that agree."""
        return json.dumps(self.snapshot(), sort_keys=True, separators=(",", ":"),
                          ensure_ascii=False)

    def encode(self) -> bytes:
        return pack([
            self.height,
            [[k, v, list(ver)] for k, (v, ver) in sorted(self.entries.items())],
            [[c, k, h, list(ver)] for (c, k), (h, ver) in sorted(self.private_anchors.items())],
        ])


def _endorsed(tx: Transaction, policy: EndorsementPolicy, msp: Mapping[str, bytes],
              identity_cache: Optional[MutableMapping]) -> bool:
    if not tx.endorsements:
        return False
    try:
        if tx.body_digest != tx.tx_id:
            return False
    except (TypeError, ValueError):
        return False
    message = endorsement_message(tx.tx_id)
    orgs = set()
    for e in tx.endorsements:
        ident = e.endorser
        ca_public = msp.get(ident.org_name)
        if ca_public is None or ident.role != Role.PEER:
            continue
        if identity_cache is not None:
            ok = identity_cache.get(ident)
            if ok is None:
                ok = identity_cache[ident] = verify_member(ident, ca_public)
        else:
            ok = verify_member(ident, ca_public)
        if ok and verify_signature(ident.public_key, e.signature, message):
            orgs.add(ident.org_name)
    return policy.is_satisfied(orgs)


def validate_transactions(block: Block, state: WorldState, policy: EndorsementPolicy,
                          msp: Mapping[str, bytes], collections: Optional[Mapping] = None,
                          identity_cache: Optional[MutableMapping] = None,
                          ) -> tuple[ValidationFlag, ...]:
    """Flag each transaction of ``block`` against ``state``.

    A transaction is valid when its endorsements satisfy ``policy`` and every
    version in its read set matches the state as left by the earlier valid
    transactions of the same block. ``collections`` optionally restricts the
    collections private writes may target.
    """
    overlay: dict[str, Optional[Version]] = {}
    flags = []
    for tx_num, tx in enumerate(block.transactions):
        if not _endorsed(tx, policy, msp, identity_cache) or (
            collections is not None
            and any(p.collection not in collections for p in tx.private_writes)
        ):
            flags.append(ValidationFlag.INVALID_ENDORSEMENT)
            continue
        stale = False
        for r in tx.read_set:
            current = overlay[r.key] if r.key in overlay else state.version(r.key)
            if current != r.version:
                stale = True
                break
        if stale:
            flags.append(ValidationFlag.INVALID_MVCC)
            continue
        for w in tx.write_set:
            overlay[w.key] = None if w.is_delete else (block.number, tx_num)
        flags.append(ValidationFlag.VALID)
    return tuple(flags)


def commit_block(state: WorldState, block: Block) -> WorldState:
    """Apply the valid transactions of a flagged block to ``state`` in place."""
    if len(block.validation_flags) != len(block.transactions):
        raise ValueError("block must carry one validation flag per transaction")
    if block.number != state.height:
        raise ValueError(f"state is at height {state.height}, cannot commit block {block.number}")
    for tx_num, (tx, flag) in enumerate(zip(block.transactions, block.validation_flags)):
        if flag != ValidationFlag.VALID:
            continue
        version = (block.number, tx_num)
        for w in tx.write_set:
            if w.is_delete:
                state.entries.pop(w.key, None)
            else:
                state.entries[w.key] = (w.value, version)
        for p in tx.private_writes:
            if not p.is_purge:
                state.private_anchors[(p.collection, p.key)] = (p.value_hash, version)
    state.height = block.number + 1
    return state
