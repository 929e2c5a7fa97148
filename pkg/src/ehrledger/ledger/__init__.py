from .chain import LedgerChain, append_block, export_chain, hash_block, import_chain, verify_chain
from .model import (
    Block,
    Endorsement,
    PrivateWrite,
    ReadItem,
    Transaction,
    ValidationFlag,
    WriteItem,
    build_transaction,
    compute_data_hash,
    proposal_digest,
)
from .policy import EndorsementPolicy
from .private import (
    CollectionPolicy,
    PrivateStore,
    private_anchor,
    purge_private,
    put_private,
    sweep_expired,
    verify_private_anchor,
)
from .state import WorldState, commit_block, endorsement_message, validate_transactions

__all__ = [
    "LedgerChain", "append_block", "export_chain", "hash_block", "import_chain",
    "verify_chain", "Block", "Endorsement", "PrivateWrite", "ReadItem", "Transaction",
    "ValidationFlag", "WriteItem", "build_transaction", "compute_data_hash",
    "proposal_digest", "EndorsementPolicy", "CollectionPolicy", "PrivateStore",
    "private_anchor", "purge_private", "put_private", "sweep_expired",
    "verify_private_anchor", "WorldState", "commit_block", "endorsement_message",
    "validate_transactions",
]
