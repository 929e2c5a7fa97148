"""Shared builders for ledger-level tests."""

from __future__ import annotations

import dataclasses
import random

from ehrledger.identity import Role, enroll_signer, setup_org_ca
from ehrledger.ledger import (
    Block,
    Endorsement,
    EndorsementPolicy,
    LedgerChain,
    ReadItem,
    WorldState,
    WriteItem,
    append_block,
    build_transaction,
    commit_block,
    compute_data_hash,
    endorsement_message,
    validate_transactions,
)


class Kit:
    """One org with a peer and a client, enough to mint endorsed transactions."""

    def __init__(self, seed: int = 0, org: str = "Healthcenter"):
        self.rng = random.Random(seed)
        self.ca = setup_org_ca(org, self.rng)
        self.peer = enroll_signer(self.ca, "peer0", Role.PEER, self.rng)
        self.client = enroll_signer(self.ca, "client0", Role.CLIENT, self.rng)
        self.msp = {org: self.ca.public_key}
        self.policy = EndorsementPolicy.any_one_of([org])
        self._n = 0

    def tx(self, reads=None, writes=None, endorse=True, private_writes=()):
        self._n += 1
        reads = reads or {}
        writes = writes or {}
        t = build_transaction(
            "put", (str(self._n).encode(),), self._n.to_bytes(8, "big"),
            [ReadItem(k, v) for k, v in reads.items()],
            [WriteItem(k, v) for k, v in writes.items()],
            private_writes, self.client.identity, b"sig",
        )
        if endorse:
            sig = self.peer.sign(endorsement_message(t.tx_id))
            t = dataclasses.replace(t, endorsements=(Endorsement(self.peer.identity, sig),))
        return t


def commit_txs(chain: LedgerChain, state: WorldState, kit: Kit, txs) -> Block:
    """Cut ``txs`` into the next block, validate, append and commit."""
    block = Block(len(chain), chain.tip_hash, compute_data_hash(txs), tuple(txs))
    flags = validate_transactions(block, state, kit.policy, kit.msp)
    block = dataclasses.replace(block, validation_flags=flags)
    append_block(chain, block)
    commit_block(state, block)
    return block


def build_chain(kit: Kit, n_blocks: int, txs_per_block: int = 2) -> LedgerChain:
    chain, state = LedgerChain(), WorldState()
    for b in range(n_blocks):
        txs = [kit.tx(writes={f"k{b}-{i}": f"v{b}-{i}".encode()}) for i in range(txs_per_block)]
        commit_txs(chain, state, kit, txs)
    return chain


RECORD = {
    "name": "Maria Papadopoulou-000417",
    "address": "12 Harbour Street, Patras 26221",
    "country": "GR",
    "dateOfBirth": "1984-03-09",
    "test": "HbA1c=5.4",
}


PRESENTATION_FIELDS = ("randomized_signature", "signature_image", "randomized_commitment",
                       "revealed", "challenge", "responses", "nonce_binding")


def mutate_presentation(pres, field: str, rng: random.Random):
    """Return ``pres`` with exactly one field changed to a different value."""
    from ehrledger.identity.group import GENERATOR, ORDER

    value = getattr(pres, field)
    if field in ("randomized_signature", "signature_image", "randomized_commitment"):
        new = value + GENERATOR * rng.randrange(1, ORDER)
    elif field == "challenge":
        new = (value + rng.randrange(1, ORDER)) % ORDER
    elif field == "responses":
        i = rng.randrange(len(value))
        new = list(value)
        new[i] = (new[i] + rng.randrange(1, ORDER)) % ORDER
        new = tuple(new)
    elif field == "nonce_binding":
        b = bytearray(value)
        b[rng.randrange(len(b))] ^= rng.randrange(1, 256)
        new = bytes(b)
    elif field == "revealed":
        if value:
            i = rng.randrange(len(value))
            idx, v = value[i]
            new = list(value)
            new[i] = (idx, v + rng.choice("xyz"))
            new = tuple(new)
        else:
            new = ((0, "Healthcenter"),)
    else:
        raise ValueError(field)
    return dataclasses.replace(pres, **{field: new})


def run_random_workload(seed: int, n_txs: int = 1000, n_blocks: int = 100, n_keys: int = 6,
                        kit: "Kit | None" = None):
    """Drive validate+commit over a conflict-heavy random workload.

    Read versions are taken from committed state at the start of each block
    (what an endorser would see), occasionally replaced by a random stale
    version. About 5% of transactions are left unendorsed. Returns
    (state, flags, specs, endorsed) where ``specs`` feeds the serial oracle.
    """
    rng = random.Random(seed)
    kit = kit or Kit(seed)
    keys = [f"k{i}" for i in range(n_keys)]
    chain, state = LedgerChain(), WorldState()
    specs, flags, endorsed = [], [], set()
    per_block = [n_txs // n_blocks] * n_blocks
    for i in range(n_txs % n_blocks):
        per_block[i] += 1
    for b, count in enumerate(per_block):
        block_specs, txs = [], []
        for t in range(count):
            reads = {}
            for k in rng.sample(keys, rng.randint(0, 2)):
                v = state.version(k)
                if rng.random() < 0.1:
                    v = (rng.randrange(max(b, 1)), rng.randrange(3))
                reads[k] = v
            writes = {k: (None if rng.random() < 0.15 else f"{b}.{t}.{k}".encode())
                      for k in rng.sample(keys, rng.randint(1, 2))}
            ok = rng.random() >= 0.05
            if ok:
                endorsed.add((b, t))
            txs.append(kit.tx(reads, writes, endorse=ok))
            block_specs.append((reads, writes))
        block = commit_txs(chain, state, kit, txs)
        flags.append([f.value for f in block.validation_flags])
        specs.append(block_specs)
    return state, flags, specs, endorsed
