"""Conventional record store with column-level encryption of name and address.

Reads scan rows sequentially from the head. This is deliberate: it mirrors an
unindexed table, whose read cost grows linearly with row count. An indexed
store would not show that curve. A set of ids backs the uniqueness
constraint on insert only.
"""

from __future__ import annotations

import json
import secrets
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .chaincode import EHRRecord
from .encoding import pack
from .errors import DuplicateRecordError, NotFoundError

_NONCE_SIZE = 12
_system_rng = secrets.SystemRandom()


@dataclass(frozen=True)
class BaselineRow:
    id: str
    country: str
    date_of_birth: str
    test: str
    name_ct: bytes
    address_ct: bytes


class BaselineStore:
    def __init__(self, key: Optional[bytes] = None, rng=None):
        self._rng = rng or _system_rng
        self.key = key if key is not None else self._rng.randbytes(32)
        self._aead = AESGCM(self.key)
        self.rows: list[BaselineRow] = []
        self._ids: set[str] = set()

    def __len__(self) -> int:
        return len(self.rows)

    def _encrypt(self, row_id: str, column: str, value: str) -> bytes:
        nonce = self._rng.randbytes(_NONCE_SIZE)
        return nonce + self._aead.encrypt(nonce, value.encode(), pack([row_id, column]))

    def _decrypt(self, row_id: str, column: str, blob: bytes) -> str:
        nonce, ct = blob[:_NONCE_SIZE], blob[_NONCE_SIZE:]
        return self._aead.decrypt(nonce, ct, pack([row_id, column])).decode()

    def encode(self) -> bytes:
        return pack([[r.id, r.country, r.date_of_birth, r.test, r.name_ct, r.address_ct]
                     for r in self.rows])


def insert_row(store: BaselineStore, record: EHRRecord) -> None:
    record.validate()
    if record.id in store._ids:
        raise DuplicateRecordError(record.id)
    store.rows.append(BaselineRow(
        record.id, record.country, record.date_of_birth, record.test,
        store._encrypt(record.id, "name", record.name),
        store._encrypt(record.id, "address", record.address),
    ))
    store._ids.add(record.id)


def read_row(store: BaselineStore, record_id: str) -> EHRRecord:
    for row in store.rows:
        if row.id == record_id:
            return EHRRecord(
                row.id,
                store._decrypt(row.id, "name", row.name_ct),
                store._decrypt(row.id, "address", row.address_ct),
                row.country, row.date_of_birth, row.test,
            )
    raise NotFoundError(record_id)


def load_jsonl(store: BaselineStore, source) -> int:
    """Bulk-insert records from a JSON-lines file path or an iterable of lines."""
    lines: Iterable[str]
    if isinstance(source, (str, Path)):
        lines = Path(source).read_text().splitlines()
    else:
        lines = source
    n = 0
    for line in lines:
        if line.strip():
            insert_row(store, EHRRecord.from_json(json.loads(line)))
            n += 1
    return n
