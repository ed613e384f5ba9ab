import json

import pytest
from hypothesis import given, strategies as st

from xem.records import (
    AnonymousValueList,
    AttributeKind,
    Record,
    RecordSet,
    SchemaError,
    UniquenessError,
    normalize_value,
    parse_records,
    parse_schema,
    serialize_records,
)

SCHEMA = parse_schema({"attributes": [
    {"name": "name", "kind": "Name"},
    {"name": "phone", "kind": "Phone"},
]})


def test_parse_csv_counts():
    data = b"record_id,name,phone\nr1,Acme,555\nr2,Bee,556\nr3,Cee,557\n"
    rs = parse_records(data, "csv", SCHEMA)
    assert len(rs) == 3


def test_parse_csv_duplicate_id():
    data = b"record_id,name\nr1,Acme\nr1,Bee\n"
    with pytest.raises(UniquenessError) as exc:
        parse_records(data, "csv", SCHEMA)
    assert "r1" in str(exc.value)


def test_parse_csv_no_header():
    with pytest.raises(SchemaError):
        parse_records(b"", "csv", SCHEMA)


def test_parse_csv_unknown_column():
    with pytest.raises(SchemaError):
        parse_records(b"record_id,bogus\nr1,x\n", "csv", SCHEMA)


def test_parse_jsonl():
    lines = [json.dumps({"record_id": f"r{i}", "attributes": {"name": "acme"}})
             for i in range(5)]
    rs = parse_records("\n".join(lines).encode(), "jsonl", SCHEMA)
    assert len(rs) == 5


def test_normalize_rules():
    r = Record("r1", "s", {"name": "  ACME  Corp "})
    assert r.normalized().get("name") == "acme corp"


def test_normalize_empty_to_absent():
    r = Record("r1", "s", {"name": "   "})
    assert r.normalized().get("name") is None


@given(st.dictionaries(st.sampled_from(["name", "phone"]),
                       st.text(max_size=30), max_size=2))
def test_normalize_idempotent(attrs):
    r = Record("r1", "s", attrs)
    once = r.normalized()
    assert once.normalized() == once


@given(st.text(max_size=40))
def test_normalize_value_idempotent(s):
    assert normalize_value(normalize_value(s)) == normalize_value(s)


def test_anonymous_defaults():
    anon = AnonymousValueList.default()
    assert anon.is_anonymous("n/a", AttributeKind.NAME)
    assert not anon.is_anonymous("acme corp", AttributeKind.NAME)
    assert anon.is_anonymous("9999999999", AttributeKind.PHONE)
    assert not anon.is_anonymous(None, AttributeKind.NAME)


def test_round_trip_jsonl_and_csv():
    data = b"record_id,source_id,name,phone\nr1,s1,Acme Corp,555 0001\nr2,s2,Bee,\n"
    rs = parse_records(data, "csv", SCHEMA)
    for fmt in ("jsonl", "csv"):
        again = parse_records(serialize_records(rs, fmt), fmt, SCHEMA)
        assert again == rs


def test_schema_descriptor_errors():
    with pytest.raises(SchemaError):
        parse_schema({"attributes": []})
    with pytest.raises(SchemaError):
        parse_schema({"attributes": [{"name": "x", "kind": "NotAKind"}]})
    with pytest.raises(SchemaError):
        parse_schema({"attributes": [{"name": "x", "kind": "Name"},
                                     {"name": "x", "kind": "Phone"}]})


def test_recordset_rejects_duplicate_ids():
    with pytest.raises(UniquenessError):
        RecordSet(SCHEMA, (Record("a", "s", {}), Record("a", "s", {})))
