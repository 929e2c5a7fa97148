import json
import random

import pytest

from ehrledger.chaincode import (
    DEFAULT_COLLECTION,
    CallerContext,
    EHRRecord,
    PublicRecordView,
    create_record,
    decode_private_pair,
    delete_record,
    encode_private_pair,
    invoke,
    private_key,
    read_private,
    read_record,
    record_key,
    update_record,
)
from ehrledger.errors import (
    AccessDeniedError,
    DuplicateRecordError,
    IntegrityError,
    NotFoundError,
    PurgedError,
)
from ehrledger.ledger import (
    LedgerChain,
    PrivateStore,
    ValidationFlag,
    WorldState,
    purge_private,
    put_private,
    verify_chain,
    verify_private_anchor,
)

from helpers import Kit, commit_txs

ORG1, ORG2, ORG3 = CallerContext("Healthcenter"), CallerContext("Hospital"), CallerContext(
    "PublicHealth")


def rec(rid="P001", **kw):
    base = dict(id=rid, name="Ann Lee", address="1 Main St", country="GR",
                date_of_birth="1980-01-02", test="LDL=2.9")
    base.update(kw)
    return EHRRecord(**base)


class Ledger:
    """Chaincode + validate + commit on one peer of Organization 1."""

    def __init__(self):
        self.kit = Kit(21)
        self.chain, self.state = LedgerChain(), WorldState()
        self.store = PrivateStore.for_policy(DEFAULT_COLLECTION)
        self.rng = random.Random(22)
        commit_txs(self.chain, self.state, self.kit, [])

    def salt(self):
        return self.rng.randbytes(16)

    def apply(self, *proposals):
        txs = [self.kit.tx({r.key: r.version for r in p.read_set},
                           {w.key: w.value for w in p.write_set},
                           private_writes=p.private_writes) for p in proposals]
        block = commit_txs(self.chain, self.state, self.kit, txs)
        for p, flag in zip(proposals, block.validation_flags):
            if flag != ValidationFlag.VALID:
                continue
            for d in p.private_data:
                put_private(self.store, d.key, d.plaintext, d.salt)
            for pw in p.private_writes:
                if pw.is_purge and pw.key in self.store:
                    purge_private(self.store, pw.key)
        return block.validation_flags


@pytest.fixture
def led():
    return Ledger()


def test_create_splits_public_and_private(led):
    p = create_record(ORG1, led.state, rec(), led.salt())
    blob = b"".join(w.value for w in p.write_set)
    assert b"Ann Lee" not in blob and b"1 Main St" not in blob
    assert led.apply(p) == (ValidationFlag.VALID,)
    view = json.loads(led.state.value(record_key("P001")))
    assert set(view) == {"id", "country", "dateOfBirth", "test"}
    assert decode_private_pair(led.store.get(private_key("P001"))[0]) == ("Ann Lee", "1 Main St")


def test_duplicate_and_schema_errors(led):
    led.apply(create_record(ORG1, led.state, rec(), led.salt()))
    with pytest.raises(DuplicateRecordError):
        create_record(ORG1, led.state, rec(), led.salt())
    for bad in (rec("P2", name=""), rec("P3", date_of_birth="02/01/1980"), rec("")):
        with pytest.raises(ValueError):
            create_record(ORG1, led.state, bad, led.salt())


def test_read_is_org_independent(led):
    led.apply(create_record(ORG2, led.state, rec(), led.salt()))
    views = {read_record(c, led.state, "P001") for c in (ORG1, ORG2, ORG3)}
    assert views == {PublicRecordView("P001", "GR", "1980-01-02", "LDL=2.9")}
    with pytest.raises(NotFoundError):
        read_record(ORG1, led.state, "nope")


@pytest.mark.parametrize("ctx", [ORG1, ORG2, ORG3])
@pytest.mark.parametrize("status", ["existing", "purged", "missing"])
def test_access_control_matrix(led, ctx, status):
    if status != "missing":
        led.apply(create_record(ORG1, led.state, rec(), led.salt()))
    if status == "purged":
        led.apply(delete_record(ORG1, led.state, "P001"))
    if ctx is not ORG1:
        expected = AccessDeniedError
    else:
        expected = {"existing": None, "purged": PurgedError, "missing": NotFoundError}[status]
    if expected is None:
        assert read_private(ctx, led.state, led.store, "P001") == ("Ann Lee", "1 Main St")
    else:
        with pytest.raises(expected):
            read_private(ctx, led.state, led.store, "P001")


def test_anonymous_caller_uses_revealed_org(led):
    led.apply(create_record(ORG1, led.state, rec(), led.salt()))
    anon = CallerContext("Healthcenter", anonymous=True)
    assert read_private(anon, led.state, led.store, "P001")[0] == "Ann Lee"
    with pytest.raises(ValueError):
        CallerContext("", anonymous=True)


def test_update_public_and_private(led):
    led.apply(create_record(ORG1, led.state, rec(), led.salt()))
    led.apply(update_record(ORG2, led.state, None, "P001", {"test": "LDL=3.1"}))
    assert read_record(ORG3, led.state, "P001").test == "LDL=3.1"
    with pytest.raises(AccessDeniedError):
        update_record(ORG2, led.state, None, "P001", {"address": "2 Side St"}, led.salt())
    salt = led.salt()
    led.apply(update_record(ORG1, led.state, led.store, "P001", {"address": "2 Side St"}, salt))
    assert read_private(ORG1, led.state, led.store, "P001") == ("Ann Lee", "2 Side St")
    anchor = led.state.anchor(DEFAULT_COLLECTION.name, private_key("P001"))[0]
    assert verify_private_anchor(encode_private_pair("Ann Lee", "2 Side St"), salt, anchor)
    with pytest.raises(NotFoundError):
        update_record(ORG1, led.state, led.store, "nope", {"test": "x"})
    with pytest.raises(ValueError):
        update_record(ORG1, led.state, led.store, "P001", {"id": "P9"})


def test_concurrent_updates_conflict(led):
    led.apply(create_record(ORG1, led.state, rec(), led.salt()))
    a = update_record(ORG1, led.state, led.store, "P001", {"test": "a"})
    b = update_record(ORG2, led.state, None, "P001", {"country": "FR"})
    assert led.apply(a, b) == (ValidationFlag.VALID, ValidationFlag.INVALID_MVCC)
    assert read_record(ORG1, led.state, "P001").country == "GR"


def test_delete_lifecycle(led):
    salt = led.salt()
    led.apply(create_record(ORG1, led.state, rec(), salt))
    anchor = led.state.anchor(DEFAULT_COLLECTION.name, private_key("P001"))
    led.apply(delete_record(ORG3, led.state, "P001"))
    with pytest.raises(NotFoundError):
        read_record(ORG1, led.state, "P001")
    with pytest.raises(PurgedError):
        read_private(ORG1, led.state, led.store, "P001")
    assert led.state.anchor(DEFAULT_COLLECTION.name, private_key("P001")) == anchor
    assert verify_private_anchor(encode_private_pair("Ann Lee", "1 Main St"), salt, anchor[0])
    assert verify_chain(led.chain)
    assert json.loads(led.state.value(record_key("P001"))) == {"deleted": True, "id": "P001"}
    with pytest.raises(NotFoundError):
        delete_record(ORG1, led.state, "P001")
    with pytest.raises(NotFoundError):
        delete_record(ORG1, led.state, "never")
    # a tombstoned id cannot be recreated
    with pytest.raises(DuplicateRecordError):
        create_record(ORG1, led.state, rec(), led.salt())


def test_tampered_private_value_detected(led):
    led.apply(create_record(ORG1, led.state, rec(), led.salt()))
    pt, salt = led.store.get(private_key("P001"))
    led.store.entries[private_key("P001")] = (encode_private_pair("Eve", "x"), salt)
    with pytest.raises(IntegrityError):
        read_private(ORG1, led.state, led.store, "P001")


def test_invoke_dispatch(led):
    p = invoke("create", ORG1, led.state, led.store,
               {"id": "P7", "country": "GR", "date_of_birth": "1970-05-05", "test": "t"},
               {"name": "N", "address": "A", "salt": led.salt()})
    led.apply(p)
    assert invoke("read", ORG2, led.state, None, {"id": "P7"}, {}).id == "P7"
    assert invoke("read-private", ORG1, led.state, led.store, {"id": "P7"}, {}) == ("N", "A")
    with pytest.raises(ValueError):
        invoke("drop", ORG1, led.state, led.store, {}, {})


def test_record_json_roundtrip():
    r = rec()
    assert r.to_json()["dateOfBirth"] == "1980-01-02"
    assert EHRRecord.from_json(r.to_json()) == r
    with pytest.raises(ValueError):
        EHRRecord.from_json({"id": "x"})
    with pytest.raises(ValueError):
        EHRRecord.from_json({**r.to_json(), "ssn": "1"})
    v = r.public_view()
    assert PublicRecordView.from_bytes(v.to_bytes()) == v
