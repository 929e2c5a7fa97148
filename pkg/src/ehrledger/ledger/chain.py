"""Append-only hash-chained block store."""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Iterator

from ..config import ZERO_DIGEST, digest
from ..encoding import pack, unpack_stream
from ..errors import ChainError
from .model import Block, compute_data_hash

_MAGIC = b"EHRLEDGER-CHAIN/1\n"


def hash_block(block: Block) -> bytes:
    """Digest of the canonical header encoding (number, prev_hash, data_hash)."""
    return digest(pack(block.header_fields()))


class LedgerChain:
    """Ordered blocks; block ``i`` links to ``hash_block(block i-1)``."""

    def __init__(self, blocks=()):
        self._blocks: list[Block] = []
        self._tip_hash = ZERO_DIGEST
        self._lock = threading.Lock()
        for b in blocks:
            append_block(self, b)

    def __len__(self) -> int:
        return len(self._blocks)

    def __iter__(self) -> Iterator[Block]:
        return iter(self._blocks)

    def __getitem__(self, i: int) -> Block:
        return self._blocks[i]

    @property
    def blocks(self) -> list[Block]:
        return self._blocks

    @property
    def tip_hash(self) -> bytes:
        """Hash of the last block, or the zero digest for an empty chain."""
        return self._tip_hash

    def encode(self) -> bytes:
        return _MAGIC + b"".join(b.encode() for b in self._blocks)

    @classmethod
    def decode(cls, data: bytes) -> "LedgerChain":
        """Rebuild a chain without link checks; call ``verify_chain`` afterwards."""
        if not data.startswith(_MAGIC):
            raise ValueError("not a chain export")
        chain = cls()
        for fields in unpack_stream(data[len(_MAGIC):]):
            chain._blocks.append(Block.from_fields(fields))
        if chain._blocks:
            chain._tip_hash = hash_block(chain._blocks[-1])
        return chain


def append_block(chain: LedgerChain, block: Block) -> LedgerChain:
    """Extend ``chain`` in place by ``block``; returns the same chain."""
    with chain._lock:
        if block.number != len(chain):
            raise ChainError(f"expected block {len(chain)}, got {block.number}")
        if block.prev_hash != chain.tip_hash:
            raise ChainError(f"block {block.number} does not link to the chain tip")
        if block.data_hash != compute_data_hash(block.transactions):
            raise ChainError(f"block {block.number} data_hash does not match its transactions")
        if block.validation_flags and len(block.validation_flags) != len(block.transactions):
            raise ChainError("validation flags do not match transaction count")
        chain._blocks.append(block)
        chain._tip_hash = hash_block(block)
    return chain


def verify_chain(chain: LedgerChain) -> bool:
    """Recompute every link, data hash and transaction id from scratch."""
    prev = ZERO_DIGEST
    for i, block in enumerate(chain):
        if block.number != i or block.prev_hash != prev:
            return False
        try:
            for tx in block.transactions:
                if tx.compute_tx_id() != tx.tx_id:
                    return False
            if compute_data_hash(block.transactions, fresh=True) != block.data_hash:
                return False
        except (TypeError, ValueError):
            return False
        prev = hash_block(block)
    return True


def export_chain(chain: LedgerChain, path) -> None:
    Path(path).write_bytes(chain.encode())


def import_chain(path) -> LedgerChain:
    return LedgerChain.decode(Path(path).read_bytes())
