"""In-process execute-order-validate network: orgs, peers, orderers, clients.

Everything runs in one process. All randomness comes from named
``random.Random`` streams derived from the configured seed, so a given
(config, script) pair always yields the same chains bit for bit.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import random
import threading
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from . import chaincode
from .chaincode import CallerContext, PrivateData
from .config import SALT_SIZE, ZERO_DIGEST
from .encoding import pack
from .errors import ChainGapError, CredentialError, LedgerError, UnauthenticatedError
from .identity.credential import (
    DEFAULT_ATTRIBUTES,
    AnonCredential,
    IssuerKey,
    Presentation,
    issue_credential,
    issuer_setup,
    present,
    verify_presentation,
)
from .identity.msp import (
    OrgCA,
    Role,
    Signer,
    StandardIdentity,
    enroll_signer,
    setup_org_ca,
    verify_member,
    verify_signature,
)
from .ledger.chain import LedgerChain, append_block, hash_block
from .ledger.model import Block, Endorsement, Transaction, ValidationFlag, build_transaction
from .ledger.model import compute_data_hash, proposal_digest
from .ledger.policy import EndorsementPolicy
from .ledger.private import (
    CollectionPolicy,
    PrivateStore,
    private_anchor,
    purge_private,
    put_private,
    sweep_expired,
)
from .ledger.state import WorldState, commit_block, endorsement_message, validate_transactions

log = logging.getLogger(__name__)

DEFAULT_ORGS = ("Healthcenter", "Hospital", "PublicHealth")
ORG_ATTRIBUTE = DEFAULT_ATTRIBUTES.index("organization")


@dataclass(frozen=True)
class NetworkConfig:
    orgs: tuple[str, ...] = DEFAULT_ORGS
    peers_per_org: int = 3
    orderers: int = 3
    endorsement_policy: Optional[EndorsementPolicy] = None
    block_size: int = 10
    batch_timeout: int = 1
    rng_seed: int = 0
    private_lifetime: Optional[int] = None
    anon_reveal: tuple[int, ...] = (ORG_ATTRIBUTE,)
    parallel_delivery: bool = False

    def __post_init__(self):
        object.__setattr__(self, "orgs", tuple(self.orgs))
        object.__setattr__(self, "anon_reveal", tuple(sorted(set(self.anon_reveal))))
        if not self.orgs or len(set(self.orgs)) != len(self.orgs) or not all(self.orgs):
            raise ValueError("orgs must be a non-empty list of distinct names")
        if self.peers_per_org < 1:
            raise ValueError("peers_per_org must be >= 1")
        if self.orderers < 1:
            raise ValueError("orderers must be >= 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.batch_timeout < 1:
            raise ValueError("batch_timeout must be >= 1")
        if self.endorsement_policy is None:
            object.__setattr__(self, "endorsement_policy", EndorsementPolicy.any_one_of(self.orgs))
        elif not self.endorsement_policy.orgs <= set(self.orgs):
            raise ValueError("endorsement policy names organizations outside the network")
        if ORG_ATTRIBUTE not in self.anon_reveal:
            raise ValueError("anonymous clients must reveal the organization attribute")
        if any(not 0 <= i < len(DEFAULT_ATTRIBUTES) for i in self.anon_reveal):
            raise ValueError("anon_reveal index out of range")

    @property
    def private_collection(self) -> CollectionPolicy:
        """Name and address live in the first organization's collection."""
        return CollectionPolicy("org1-private", frozenset({self.orgs[0]}), self.private_lifetime)

    def to_json(self) -> dict:
        return {
            "orgs": list(self.orgs),
            "peersPerOrg": self.peers_per_org,
            "orderers": self.orderers,
            "policy": str(self.endorsement_policy),
            "blockSize": self.block_size,
            "batchTimeout": self.batch_timeout,
            "seed": self.rng_seed,
            "privateLifetime": self.private_lifetime,
            "anonReveal": list(self.anon_reveal),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "NetworkConfig":
        known = {"orgs", "peersPerOrg", "orderers", "policy", "blockSize", "batchTimeout",
                 "seed", "privateLifetime", "anonReveal", "parallelDelivery"}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        kwargs = {}
        if "orgs" in obj:
            kwargs["orgs"] = tuple(obj["orgs"])
        for key, name in (("peersPerOrg", "peers_per_org"), ("orderers", "orderers"),
                          ("blockSize", "block_size"), ("batchTimeout", "batch_timeout"),
                          ("seed", "rng_seed")):
            if key in obj:
                kwargs[name] = int(obj[key])
        if obj.get("privateLifetime") is not None:
            kwargs["private_lifetime"] = int(obj["privateLifetime"])
        if "anonReveal" in obj:
            kwargs["anon_reveal"] = tuple(int(i) for i in obj["anonReveal"])
        if "parallelDelivery" in obj:
            kwargs["parallel_delivery"] = bool(obj["parallelDelivery"])
        if obj.get("policy") not in (None, "", "default"):
            kwargs["endorsement_policy"] = EndorsementPolicy.parse(obj["policy"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "NetworkConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class CommitReport:
    peer: str
    block_number: int
    flags: tuple[ValidationFlag, ...]
    purged: list[tuple[str, str]] = field(default_factory=list)


class Peer:
    def __init__(self, name: str, signer: Signer, msp: Mapping[str, bytes],
                 policy: EndorsementPolicy, collection: CollectionPolicy, verifier_key):
        self.name = name
        self.signer = signer
        self.msp = msp
        self.policy = policy
        self.collection = collection
        self.verifier_key = verifier_key
        self.chain = LedgerChain()
        self.state = WorldState()
        self.private_store: Optional[PrivateStore] = (
            PrivateStore.for_policy(collection) if collection.is_member(self.org) else None
        )
        self.transient: dict[bytes, list[PrivateData]] = {}
        self.identity_cache: dict[StandardIdentity, bool] = {}
        self.lock = threading.Lock()

    @property
    def org(self) -> str:
        return self.signer.org_name

    @property
    def identity(self) -> StandardIdentity:
        return self.signer.identity

    @property
    def private_stores(self) -> dict[str, PrivateStore]:
        return {} if self.private_store is None else {self.collection.name: self.private_store}

    def __repr__(self) -> str:
        return f"Peer({self.name!r}, height={len(self.chain)})"

    def _is_member(self, ident: StandardIdentity) -> bool:
        ok = self.identity_cache.get(ident)
        if ok is None:
            ca = self.msp.get(ident.org_name)
            ok = self.identity_cache[ident] = ca is not None and verify_member(ident, ca)
        return ok

    def authenticate(self, creator, creator_signature: bytes, prop_digest: bytes) -> CallerContext:
        """Check the client behind a proposal and derive its caller context."""
        if isinstance(creator, StandardIdentity):
            if creator.role not in (Role.CLIENT, Role.ADMIN) or not self._is_member(creator):
                raise UnauthenticatedError(f"{creator.subject} is not an enrolled client")
            if not verify_signature(creator.public_key, creator_signature, prop_digest):
                raise UnauthenticatedError("bad client signature on proposal")
            return CallerContext(creator.org_name, anonymous=False)
        if isinstance(creator, Presentation):
            try:
                revealed = verify_presentation(creator, self.verifier_key, prop_digest)
            except CredentialError as exc:
                raise UnauthenticatedError(f"anonymous credential rejected: {exc}") from exc
            org = revealed.get(ORG_ATTRIBUTE)
            if org not in self.msp:
                raise UnauthenticatedError("presentation does not disclose a known organization")
            return CallerContext(org, anonymous=True)
        raise UnauthenticatedError(f"unsupported creator {type(creator).__name__}")

    def execute(self, function: str, ctx: CallerContext, args: Mapping, transient: Mapping):
        with self.lock:
            return chaincode.invoke(function, ctx, self.state, self.private_store, args,
                                    transient, self.collection)

    def commit(self, block: Block) -> CommitReport:
        with self.lock:
            if block.number != len(self.chain):
                raise ChainGapError(
                    f"{self.name} is at height {len(self.chain)}, got block {block.number}"
                )
            flags = validate_transactions(block, self.state, self.policy, self.msp,
                                          {self.collection.name: self.collection},
                                          self.identity_cache)
            committed = dataclasses.replace(block, validation_flags=flags)
            append_block(self.chain, committed)
            commit_block(self.state, committed)
            for tx, flag in zip(block.transactions, flags):
                disseminated = self.transient.pop(tx.tx_id, [])
                if flag == ValidationFlag.VALID and self.private_store is not None:
                    self._apply_private(tx, disseminated)
            purged = []
            if self.private_store is not None and self.collection.lifetime is not None:
                purged = sweep_expired(self.state, self.private_stores, [self.collection],
                                       block.number)
            return CommitReport(self.name, block.number, flags, purged)

    def _apply_private(self, tx: Transaction, disseminated: list[PrivateData]) -> None:
        store = self.private_store
        by_key = {(d.collection, d.key): d for d in disseminated}
        for pw in tx.private_writes:
            if pw.collection != store.collection_name:
                continue
            if pw.is_purge:
                if pw.key in store:
                    purge_private(store, pw.key)
                continue
            d = by_key.get((pw.collection, pw.key))
            if d is None or private_anchor(d.plaintext, d.salt) != pw.value_hash:
                log.warning("%s: missing or mismatched private data for %s", self.name, pw.key)
                continue
            put_private(store, pw.key, d.plaintext, d.salt)

    def snapshot_bytes(self) -> bytes:
        """Everything this peer holds, as raw bytes (for leak searches)."""
        parts = [self.chain.encode(), self.state.encode()]
        if self.private_store is not None:
            parts.append(self.private_store.encode())
        for tx_id in sorted(self.transient):
            for d in self.transient[tx_id]:
                parts.append(pack([tx_id, d.collection, d.key, d.plaintext, d.salt]))
        return b"".join(parts)


class OrderingService:
    """FIFO orderer with a block cutter; the orderer nodes share one logical queue."""

    def __init__(self, nodes: list[StandardIdentity], block_size: int, batch_timeout: int):
        self.nodes = nodes
        self.leader = nodes[0]
        self.block_size = block_size
        self.batch_timeout = batch_timeout
        self.pending: list[Transaction] = []
        self.ticks = 0
        self.next_number = 0
        self.tip_hash = ZERO_DIGEST
        self.sequence = 0

    def _cut(self) -> Block:
        txs = tuple(self.pending)
        self.pending = []
        self.ticks = 0
        block = Block(self.next_number, self.tip_hash, compute_data_hash(txs), txs)
        self.next_number += 1
        self.tip_hash = hash_block(block)
        return block

    def broadcast(self, tx: Transaction) -> list[Block]:
        self.pending.append(tx)
        self.sequence += 1
        if len(self.pending) >= self.block_size:
            return [self._cut()]
        return []

    def tick(self) -> list[Block]:
        if not self.pending:
            return []
        self.ticks += 1
        if self.ticks >= self.batch_timeout:
            return [self._cut()]
        return []

    def drain(self) -> list[Block]:
        """Tick until the pending batch times out."""
        blocks = []
        while self.pending:
            blocks += self.tick()
        return blocks

    def genesis(self) -> Block:
        if self.next_number != 0 or self.pending:
            raise LedgerError("genesis must be the first block")
        return self._cut()


@dataclass
class Client:
    name: str
    org: str
    signer: Optional[Signer] = None
    credential: Optional[AnonCredential] = None
    reveal: tuple[int, ...] = (ORG_ATTRIBUTE,)

    @property
    def anonymous(self) -> bool:
        return self.credential is not None

    def authenticate(self, prop_digest: bytes, rng) -> tuple[Union[StandardIdentity, Presentation], bytes]:
        if self.credential is not None:
            return present(self.credential, self.reveal, prop_digest, rng), b""
        return self.signer.identity, self.signer.sign(prop_digest)


ClientRef = Union[str, Client]


class Network:
    def __init__(self, config: NetworkConfig):
        self.config = config
        self.rngs: dict[str, random.Random] = {}
        self.counters: dict[str, int] = defaultdict(int)
        self._rr: dict[str, int] = defaultdict(int)
        self._executor: Optional[ThreadPoolExecutor] = None
        self.collection = config.private_collection
        self.policy = config.endorsement_policy

        keys = self.rng("keys")
        self.cas: dict[str, OrgCA] = {org: setup_org_ca(org, keys) for org in config.orgs}
        self.msp: dict[str, bytes] = {org: ca.public_key for org, ca in self.cas.items()}
        self.issuer: IssuerKey = issuer_setup(len(DEFAULT_ATTRIBUTES), keys)
        self.orderer_ca = setup_org_ca("OrdererOrg", keys)
        self.peers: dict[str, list[Peer]] = {}
        for org in config.orgs:
            self.peers[org] = [
                Peer(f"peer{i}.{org}",
                     enroll_signer(self.cas[org], f"peer{i}.{org}", Role.PEER, keys),
                     self.msp, self.policy, self.collection, self.issuer.verifier_key)
                for i in range(config.peers_per_org)
            ]
        nodes = [enroll_signer(self.orderer_ca, f"orderer{i}", Role.ORDERER, keys).identity
                 for i in range(config.orderers)]
        self.orderer = OrderingService(nodes, config.block_size, config.batch_timeout)
        self.clients: dict[str, Client] = {}
        for org in config.orgs:
            signer = enroll_signer(self.cas[org], f"client0@{org}", Role.CLIENT, keys)
            self.clients[org] = Client(org, org, signer=signer)
        self.deliver(self.orderer.genesis())

    def rng(self, stream: str) -> random.Random:
        """Named deterministic random stream derived from the config seed."""
        r = self.rngs.get(stream)
        if r is None:
            r = self.rngs[stream] = random.Random(f"{self.config.rng_seed}/{stream}")
        return r

    @property
    def idemix_issuer(self):
        return self.issuer.public

    @property
    def all_peers(self) -> list[Peer]:
        return [p for org in self.config.orgs for p in self.peers[org]]

    def peer(self, name: str) -> Peer:
        for p in self.all_peers:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def member_peers(self) -> list[Peer]:
        return [p for p in self.all_peers if p.private_store is not None]

    @property
    def height(self) -> int:
        return self.orderer.next_number

    def client(self, ref: ClientRef) -> Client:
        """Resolve a client by name.

        ``<Org>`` is that organization's standard client; ``anon@<Org>`` an
        anonymous credential holder of the organization; ``anon`` is
        ``anon@<first org>``.
        """
        if isinstance(ref, Client):
            return ref
        if ref in self.clients:
            return self.clients[ref]
        if ref == "anon":
            return self.client(f"anon@{self.config.orgs[0]}")
        if ref.startswith("anon@") and ref[5:] in self.cas:
            org = ref[5:]
            k = sum(1 for c in self.clients.values() if c.anonymous)
            cred = issue_credential(
                self.issuer, [org, Role.CLIENT.value, f"anon-{k}", f"{org}/clinical"],
                self.rng("anon-issuance"),
            )
            client = self.clients[ref] = Client(ref, org, credential=cred,
                                                reveal=self.config.anon_reveal)
            return client
        raise KeyError(f"unknown client {ref!r}")

    def pick_endorser(self, org: str) -> Peer:
        """Round-robin over the peers of ``org`` (or of a policy org if ``org`` is not in it)."""
        if org not in self.policy.orgs:
            orgs = sorted(self.policy.orgs)
            org = orgs[self._rr["__policy__"] % len(orgs)]
            self._rr["__policy__"] += 1
        peers = self.peers[org]
        i = self._rr[org] % len(peers)
        self._rr[org] += 1
        return peers[i]

    def deliver(self, block: Block, parallel: Optional[bool] = None) -> dict[str, CommitReport]:
        return deliver_and_commit(self, block, parallel)

    def process(self, txs: Iterable[Transaction]) -> list[dict[str, CommitReport]]:
        """Order ``txs``, cut blocks (flushing the tail) and commit them everywhere."""
        return [self.deliver(b) for b in order_and_cut(self, txs)]

    def public_snapshots(self) -> dict[str, str]:
        return {p.name: p.state.snapshot_json() for p in self.all_peers}

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None


def init_network(config: Optional[NetworkConfig] = None) -> Network:
    return Network(config or NetworkConfig())


_RECORD_KEYS = {"dateOfBirth": "date_of_birth", "date_of_birth": "date_of_birth",
                "id": "id", "country": "country", "test": "test",
                "name": "name", "address": "address"}


def split_args(args: Mapping) -> tuple[dict, dict]:
    """Split client-supplied record fields into public args and transient data."""
    public, transient = {}, {}
    for k, v in args.items():
        name = _RECORD_KEYS.get(k)
        if name is None:
            raise ValueError(f"unknown argument {k!r}")
        (transient if name in chaincode.PRIVATE_FIELDS else public)[name] = v
    return public, transient


def _encode_args(args: Mapping) -> tuple[bytes, ...]:
    return (json.dumps(dict(args), sort_keys=True, separators=(",", ":"),
                       ensure_ascii=False).encode(),)


def submit_proposal(net: Network, client: ClientRef, function: str, args: Mapping) -> Transaction:
    """Execution phase: endorse a write and return the assembled transaction.

    ``args`` uses record field names; name and address are routed through
    transient data so they never appear in the transaction.
    """
    if function not in chaincode.WRITE_FUNCTIONS:
        raise ValueError(f"{function!r} is not a write function")
    client = net.client(client)
    public, transient = split_args(args)
    if function == "create" and "id" not in public:
        public["id"] = net.rng("ids").randbytes(16).hex()
    if function == "create" or (function == "update" and transient):
        transient["salt"] = net.rng("salts").randbytes(SALT_SIZE)
    fn_args = _encode_args(public)
    nonce = net.rng("nonces").randbytes(16)
    prop = proposal_digest(function, fn_args, nonce)
    creator, creator_sig = client.authenticate(prop, net.rng("crypto"))

    endorser = net.pick_endorser(client.org)
    ctx = endorser.authenticate(creator, creator_sig, prop)
    result = endorser.execute(function, ctx, public, transient)
    tx = build_transaction(function, fn_args, nonce, result.read_set, result.write_set,
                           result.private_writes, creator, creator_sig)
    sig = endorser.signer.sign(endorsement_message(tx.tx_id))
    tx = dataclasses.replace(tx, endorsements=(Endorsement(endorser.identity, sig),))
    if result.private_data:
        for peer in net.all_peers:
            if peer.private_store is not None:
                peer.transient.setdefault(tx.tx_id, []).extend(
                    d for d in result.private_data if d.collection == peer.collection.name
                )
    net.counters["proposals"] += 1
    return tx


def query(net: Network, client: ClientRef, function: str, args: Mapping):
    """Evaluate a read-only chaincode function on one peer of the client's org.

    The proposal is signed (or carries a bound presentation), and the peer
    signs its response, which the client checks before returning it.
    """
    if function not in chaincode.QUERY_FUNCTIONS:
        raise ValueError(f"{function!r} is not a query function")
    client = net.client(client)
    public, _ = split_args(args)
    fn_args = _encode_args(public)
    nonce = net.rng("nonces").randbytes(16)
    prop = proposal_digest(function, fn_args, nonce)
    creator, creator_sig = client.authenticate(prop, net.rng("crypto"))
    peer = net.pick_endorser(client.org) if client.org in net.peers else None
    if peer is None:
        raise UnauthenticatedError(f"no peers for {client.org}")
    ctx = peer.authenticate(creator, creator_sig, prop)
    result = peer.execute(function, ctx, public, {})
    payload = result.to_bytes() if hasattr(result, "to_bytes") else pack(list(result))
    response_sig = peer.signer.sign(pack(["query-response", prop, payload]))
    if not (verify_member(peer.identity, net.msp[peer.org])
            and verify_signature(peer.identity.public_key, response_sig,
                                 pack(["query-response", prop, payload]))):
        raise UnauthenticatedError("peer response signature invalid")
    net.counters["queries"] += 1
    return result


def order_and_cut(net: Network, txs: Iterable[Transaction]) -> list[Block]:
    """Ordering phase: sequence ``txs`` FIFO and cut blocks; the tail is cut by timeout."""
    blocks = []
    for tx in txs:
        blocks += net.orderer.broadcast(tx)
    blocks += net.orderer.drain()
    return blocks


def deliver_and_commit(net: Network, block: Block,
                       parallel: Optional[bool] = None) -> dict[str, CommitReport]:
    """Validation phase: every peer validates and commits ``block`` independently."""
    if parallel is None:
        parallel = net.config.parallel_delivery
    peers = net.all_peers
    if parallel:
        if net._executor is None:
            net._executor = ThreadPoolExecutor(max_workers=len(peers))
        reports = list(net._executor.map(lambda p: p.commit(block), peers))
    else:
        reports = [p.commit(block) for p in peers]
    flags = reports[0].flags
    net.counters["blocks_committed"] += 1
    net.counters["committed_txs"] += len(block.transactions)
    net.counters["valid_txs"] += sum(1 for f in flags if f == ValidationFlag.VALID)
    return {r.peer: r for r in reports}


@dataclass
class OpResult:
    index: int
    op: str
    client: str
    status: str
    latency_ms: Optional[float] = None
    tx_id: Optional[str] = None
    result: object = None
    error: Optional[str] = None


@dataclass
class WorkloadResult:
    ops: list[OpResult]
    summary: dict
    snapshots: dict[str, str]


def _summarize(ops: list[OpResult]) -> dict:
    if not ops:
        return {}
    status = defaultdict(int)
    latencies = defaultdict(list)
    for r in ops:
        status[r.status] += 1
        if r.latency_ms is not None:
            latencies[r.op].append(r.latency_ms)
    return {
        "ops": len(ops),
        "status": dict(sorted(status.items())),
        "mean_latency_ms": {op: sum(v) / len(v) for op, v in sorted(latencies.items())},
    }


def parse_script(lines: Iterable[str]) -> list[dict]:
    """Parse a JSON-lines workload script: one ``{op, client, args}`` per line."""
    ops = []
    for n, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        obj = json.loads(line)
        if "op" not in obj:
            raise ValueError(f"line {n}: missing 'op'")
        ops.append(obj)
    return ops


def run_workload(net: Network, script: Iterable[Mapping]) -> WorkloadResult:
    """Drive the full propose-order-validate pipeline from a list of client ops.

    Writes are batched by the orderer and commit when a block is cut; reads
    see committed state only. ``{"op": "tick"}`` advances the batch timer.
    Per-op failures are recorded, not raised.
    """
    results: list[OpResult] = []
    inflight: dict[bytes, tuple[OpResult, float]] = {}

    def commit(blocks):
        for block in blocks:
            reports = net.deliver(block)
            done = time.perf_counter()
            flags = next(iter(reports.values())).flags
            for tx, flag in zip(block.transactions, flags):
                entry = inflight.pop(tx.tx_id, None)
                if entry is not None:
                    res, t0 = entry
                    res.status = flag.value
                    res.latency_ms = (done - t0) * 1e3

    for i, op in enumerate(script):
        name = op["op"]
        client = op.get("client", net.config.orgs[0])
        args = op.get("args", {})
        if name == "tick":
            commit(net.orderer.tick())
            continue
        res = OpResult(i, name, client, "pending")
        results.append(res)
        t0 = time.perf_counter()
        try:
            if name in chaincode.WRITE_FUNCTIONS:
                tx = submit_proposal(net, client, name, args)
                res.tx_id = tx.tx_id.hex()
                inflight[tx.tx_id] = (res, t0)
                commit(net.orderer.broadcast(tx))
            elif name in chaincode.QUERY_FUNCTIONS:
                res.result = query(net, client, name, args)
                res.latency_ms = (time.perf_counter() - t0) * 1e3
                res.status = "ok"
            else:
                raise ValueError(f"unknown op {name!r}")
        except (LedgerError, ValueError, KeyError) as exc:
            res.status = f"error:{type(exc).__name__}"
            res.error = str(exc)
            res.latency_ms = (time.perf_counter() - t0) * 1e3
    commit(net.orderer.drain())
    return WorkloadResult(results, _summarize(results), net.public_snapshots())
