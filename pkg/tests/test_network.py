import dataclasses
import json
import random

import pytest

from ehrledger.errors import (
    AccessDeniedError,
    ChainGapError,
    NotFoundError,
    PurgedError,
    UnauthenticatedError,
)
from ehrledger.identity import Presentation
from ehrledger.ledger import (
    Block,
    EndorsementPolicy,
    ValidationFlag,
    compute_data_hash,
    hash_block,
    validate_transactions,
    verify_chain,
)
from ehrledger.network import (
    NetworkConfig,
    OrderingService,
    deliver_and_commit,
    init_network,
    order_and_cut,
    parse_script,
    query,
    run_workload,
    submit_proposal,
)

from helpers import RECORD, Kit, mutate_presentation
from oracles import serial_replay


def rec(i):
    return {**RECORD, "name": f"Patient {i:04d}-x", "address": f"{i} Quay Road"}


def creates(n, client="Healthcenter"):
    return [{"op": "create", "client": client, "args": {**rec(i), "id": f"R{i:04d}"}}
            for i in range(n)]


def test_default_topology():
    net = init_network()
    assert len(net.all_peers) == 9 and len(net.orderer.nodes) == 3
    assert [p.org for p in net.member_peers] == ["Healthcenter"] * 3
    assert str(net.policy) == "any-one-of(Healthcenter,Hospital,PublicHealth)"
    assert all(len(p.chain) == 1 and verify_chain(p.chain) for p in net.all_peers)
    assert net.idemix_issuer.attribute_count == 4


@pytest.mark.parametrize("kw", [{"peers_per_org": 0}, {"orderers": 0}, {"block_size": 0},
                                {"batch_timeout": 0}, {"orgs": ()}, {"orgs": ("A", "A")},
                                {"endorsement_policy": EndorsementPolicy.any_one_of(["Z"])},
                                {"anon_reveal": (1,)}])
def test_invalid_config(kw):
    with pytest.raises(ValueError):
        NetworkConfig(**kw)


def test_config_json_roundtrip(tmp_path):
    cfg = NetworkConfig(block_size=4, rng_seed=7, private_lifetime=5,
                        endorsement_policy=EndorsementPolicy.any_one_of(["Hospital"]))
    p = tmp_path / "net.json"
    p.write_text(json.dumps(cfg.to_json()))
    assert NetworkConfig.load(p) == cfg
    with pytest.raises(ValueError):
        NetworkConfig.from_json({"bogus": 1})


def test_same_seed_same_genesis():
    a, b = init_network(NetworkConfig(rng_seed=3)), init_network(NetworkConfig(rng_seed=3))
    assert a.all_peers[0].chain.encode() == b.all_peers[0].chain.encode()
    assert a.public_snapshots() == b.public_snapshots()
    assert a.msp == b.msp
    assert init_network(NetworkConfig(rng_seed=4)).msp != a.msp


def test_single_endorsement_from_client_org():
    net = init_network()
    tx = submit_proposal(net, "Hospital", "create", rec(1))
    assert len(tx.endorsements) == 1
    assert tx.endorsements[0].endorser.org_name == "Hospital"
    assert b"Patient 0001" not in tx.encode()
    reports = net.process([tx])
    assert all(r.flags == (ValidationFlag.VALID,) for r in reports[0].values())


def test_endorser_round_robin():
    net = init_network()
    names = [net.pick_endorser("Hospital").name for _ in range(4)]
    assert names == ["peer0.Hospital", "peer1.Hospital", "peer2.Hospital", "peer0.Hospital"]


def test_forged_presentation_unauthenticated():
    net = init_network()
    client = net.client("anon")
    prop = b"p" * 32
    pres, _ = client.authenticate(prop, random.Random(1))
    peer = net.all_peers[0]
    assert peer.authenticate(pres, b"", prop).anonymous
    bad = mutate_presentation(pres, "responses", random.Random(2))
    with pytest.raises(UnauthenticatedError):
        peer.authenticate(bad, b"", prop)
    with pytest.raises(UnauthenticatedError):
        peer.authenticate(pres, b"", b"q" * 32)


def test_unenrolled_client_unauthenticated():
    net = init_network()
    stranger = Kit(5, org="Hospital").client
    sig = stranger.sign(b"x")
    with pytest.raises(UnauthenticatedError):
        net.all_peers[0].authenticate(stranger.identity, sig, b"x")
    with pytest.raises(KeyError):
        net.client("Nobody")


def test_stripped_endorsement_flagged():
    net = init_network()
    tx = submit_proposal(net, "Healthcenter", "create", rec(2))
    stripped = dataclasses.replace(tx, endorsements=())
    reports = net.process([stripped])
    assert {r.flags for r in reports[0].values()} == {(ValidationFlag.INVALID_ENDORSEMENT,)}
    with pytest.raises(NotFoundError):
        query(net, "Hospital", "read", {"id": tx_id_record(tx)})


def tx_id_record(tx):
    return json.loads(tx.args[0])["id"]


def test_block_cutting_sizes():
    kit = Kit(6)
    svc = OrderingService([kit.peer.identity], block_size=10, batch_timeout=1)
    svc.genesis()
    blocks = []
    for _ in range(25):
        blocks += svc.broadcast(kit.tx(writes={"a": b"1"}))
    blocks += svc.drain()
    assert [len(b.transactions) for b in blocks] == [10, 10, 5]


def test_timeout_cuts_single_tx():
    kit = Kit(7)
    svc = OrderingService([kit.peer.identity], block_size=10, batch_timeout=2)
    svc.genesis()
    assert svc.broadcast(kit.tx()) == []
    assert svc.tick() == []
    (block,) = svc.tick()
    assert len(block.transactions) == 1
    assert svc.tick() == []  # nothing pending, no empty blocks


def test_fifo_and_chaining_over_1000():
    kit = Kit(8)
    rng = random.Random(9)
    svc = OrderingService([kit.peer.identity], block_size=rng.randint(3, 17), batch_timeout=3)
    prev = svc.genesis()
    sent, blocks = [], []
    for _ in range(1000):
        tx = kit.tx(writes={"k": b"v"}, endorse=False)
        sent.append(tx.tx_id)
        blocks += svc.broadcast(tx)
        if rng.random() < 0.05:
            blocks += svc.tick()
    blocks += svc.drain()
    assert [t.tx_id for b in blocks for t in b.transactions] == sent
    for b in blocks:
        assert b.prev_hash == hash_block(prev) and b.number == prev.number + 1
        prev = b


def test_one_valid_tx_updates_everyone():
    net = init_network()
    before = {p.name: len(p.private_store) for p in net.member_peers}
    reports = net.process([submit_proposal(net, "Healthcenter", "create", rec(3))])
    assert len(reports[0]) == 9
    assert len(set(net.public_snapshots().values())) == 1
    assert all(len(p.private_store) == before[p.name] + 1 for p in net.member_peers)


def test_non_member_peers_never_see_plaintext():
    net = init_network()
    net.process([submit_proposal(net, c, "create", rec(i))
                 for i, c in enumerate(["Hospital", "PublicHealth", "anon@Hospital"])])
    for p in net.all_peers:
        snap = p.snapshot_bytes()
        for i in range(3):
            found = f"Patient {i:04d}-x".encode() in snap
            assert found is (p.org == "Healthcenter")


def test_chain_gap():
    net = init_network()
    peer = net.all_peers[0]
    with pytest.raises(ChainGapError):
        peer.commit(Block(5, peer.chain.tip_hash, compute_data_hash(())))


def test_policy_monotonicity():
    net = init_network(NetworkConfig(endorsement_policy=EndorsementPolicy.any_one_of(
        ["Healthcenter"])))
    tx = submit_proposal(net, "Healthcenter", "create", rec(4))
    peer = net.all_peers[0]
    block = Block(1, peer.chain.tip_hash, compute_data_hash([tx]), (tx,))
    for orgs in (["Healthcenter"], ["Healthcenter", "Hospital"],
                 ["Healthcenter", "Hospital", "PublicHealth"]):
        pol = EndorsementPolicy.any_one_of(orgs)
        assert validate_transactions(block, peer.state, pol, net.msp) == (ValidationFlag.VALID,)
    assert validate_transactions(block, peer.state, EndorsementPolicy.any_one_of(["Hospital"]),
                                 net.msp) == (ValidationFlag.INVALID_ENDORSEMENT,)


def test_endorser_outside_policy_routed_to_policy_org():
    net = init_network(NetworkConfig(endorsement_policy=EndorsementPolicy.any_one_of(
        ["PublicHealth"])))
    tx = submit_proposal(net, "Hospital", "create", rec(5))
    assert tx.endorsements[0].endorser.org_name == "PublicHealth"


def test_run_workload_creates():
    net = init_network()
    res = run_workload(net, creates(100))
    assert res.summary["status"] == {"valid": 100}
    peer = net.all_peers[4]
    assert sum(1 for k in peer.state.entries if k.startswith("rec/")) == 100
    assert len(set(res.snapshots.values())) == 1


def test_run_workload_empty():
    res = run_workload(init_network(), [])
    assert res.ops == [] and res.summary == {}


def conflict_script(seed, n=120):
    rng = random.Random(seed)
    script = creates(10)
    for _ in range(n):
        rid = f"R{rng.randrange(10):04d}"
        client = rng.choice(["Healthcenter", "Hospital", "anon@PublicHealth"])
        op = rng.random()
        if op < 0.7:
            script.append({"op": "update", "client": client,
                           "args": {"id": rid, "test": f"t{rng.randrange(99)}"}})
        elif op < 0.8:
            script.append({"op": "read", "client": client, "args": {"id": rid}})
        elif op < 0.9:
            script.append({"op": "tick"})
        else:
            script.append({"op": "delete", "client": client, "args": {"id": rid}})
    return script


def test_conflicts_match_serial_oracle():
    net = init_network(NetworkConfig(rng_seed=1))
    res = run_workload(net, conflict_script(1))
    chain = net.all_peers[0].chain
    specs = [[({r.key: r.version for r in tx.read_set},
               {w.key: w.value for w in tx.write_set}) for tx in b.transactions]
             for b in chain]
    ref_state, ref_flags = serial_replay(specs, lambda b, t: True)
    assert [[f.value for f in b.validation_flags] for b in chain] == ref_flags
    assert net.all_peers[0].state.entries == ref_state
    n_mvcc = sum(f == "invalid_mvcc" for fl in ref_flags for f in fl)
    assert n_mvcc > 0 and res.summary["status"]["invalid_mvcc"] == n_mvcc


def test_determinism_and_parallel_delivery():
    script = conflict_script(2)
    runs = []
    for parallel in (False, False, True):
        net = init_network(NetworkConfig(rng_seed=5, parallel_delivery=parallel))
        run_workload(net, script)
        runs.append(([p.chain.encode() for p in net.all_peers], net.public_snapshots()))
        net.close()
    assert runs[0] == runs[1] == runs[2]


def test_state_equality_at_every_height():
    net = init_network(NetworkConfig(block_size=3))
    txs = [submit_proposal(net, "Hospital", "create", rec(i)) for i in range(30)]
    for block in order_and_cut(net, txs):
        deliver_and_commit(net, block)
        assert len(set(net.public_snapshots().values())) == 1
    assert net.height == 11


def test_lifetime_sweep_through_network():
    net = init_network(NetworkConfig(private_lifetime=2, block_size=1))
    run_workload(net, creates(1))
    assert query(net, "Healthcenter", "read-private", {"id": "R0000"})
    run_workload(net, [{"op": "create", "client": "Hospital",
                        "args": {**rec(9), "id": f"X{i}"}} for i in range(3)])
    with pytest.raises(PurgedError):
        query(net, "Healthcenter", "read-private", {"id": "R0000"})
    assert net.all_peers[0].state.anchor("org1-private", "R0000/priv") is not None


def test_queries_and_access():
    net = init_network()
    run_workload(net, creates(1))
    assert query(net, "PublicHealth", "read", {"id": "R0000"}).country == "GR"
    assert query(net, "anon", "read-private", {"id": "R0000"})[1] == "0 Quay Road"
    with pytest.raises(AccessDeniedError):
        query(net, "anon@Hospital", "read-private", {"id": "R0000"})
    with pytest.raises(ValueError):
        query(net, "Hospital", "create", {})
    with pytest.raises(ValueError):
        submit_proposal(net, "Hospital", "read", {"id": "R0000"})


def test_anonymous_creator_on_chain():
    net = init_network()
    tx = submit_proposal(net, "anon@Hospital", "create", rec(6))
    assert isinstance(tx.creator, Presentation)
    assert tx.creator.revealed == ((0, "Hospital"),)
    assert tx.creator_signature == b""


def test_parse_script():
    ops = parse_script(['{"op": "tick"}', "", "# comment", '{"op": "read", "args": {}}'])
    assert [o["op"] for o in ops] == ["tick", "read"]
    with pytest.raises(ValueError):
        parse_script(['{"client": "x"}'])
