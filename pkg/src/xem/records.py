"""Record data model, ingestion, normalization and anonymous-value handling."""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources


class AttributeKind(str, Enum):
    NAME = "Name"
    ADDRESS = "Address"
    DOB = "Dob"
    IDENTIFIER = "Identifier"
    PHONE = "Phone"
    FREE_TEXT = "FreeText"


class SchemaError(ValueError):
    """Raised when a file's header or schema descriptor is malformed."""


class UniquenessError(ValueError):
    """Raised when record ids collide within one input."""

    def __init__(self, duplicate_ids: list[str]):
        self.duplicate_ids = duplicate_ids
        super().__init__(f"duplicate record ids: {', '.join(sorted(duplicate_ids))}")


_WS = re.compile(r"\s+")


def normalize_value(value: str | None) -> str | None:
    """Case-fold, collapse whitespace and trim; empty becomes None."""
    if value is None:
        return None
    v = _WS.sub(" ", value).strip().casefold()
    return v or None


@dataclass(frozen=True)
class Record:
    """A single attributed source record.

    Attribute values are stored in ``attributes``; a missing value is an
    absent key (never an empty string once normalized).
    """

    record_id: str
    source_id: str
    attributes: dict[str, str]

    def get(self, name: str) -> str | None:
        return self.attributes.get(name)

    def normalized(self) -> "Record":
        attrs = {}
        for name, value in self.attributes.items():
            v = normalize_value(value)
            if v is not None:
                attrs[name] = v
        return Record(self.record_id, self.source_id, attrs)

    def filled_count(self, anon: "AnonymousValueList", kind_of: dict[str, AttributeKind]) -> int:
        """Number of attributes with a real (non-missing, non-anonymous) value."""
        n = 0
        for name, value in self.attributes.items():
            kind = kind_of.get(name, AttributeKind.FREE_TEXT)
            if not anon.is_anonymous(value, kind):
                n += 1
        return n


@dataclass(frozen=True)
class RecordSet:
    """An immutable set of records sharing one schema.

    ``schema`` is an ordered list of (attribute name, kind); record ids are
    unique, enforced at construction.
    """

    schema: tuple[tuple[str, AttributeKind], ...]
    records: tuple[Record, ...]
    index: dict[str, Record] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        seen: dict[str, int] = {}
        for r in self.records:
            if not r.record_id:
                raise UniquenessError([""])
            seen[r.record_id] = seen.get(r.record_id, 0) + 1
        dupes = [rid for rid, n in seen.items() if n > 1]
        if dupes:
            raise UniquenessError(dupes)
        object.__setattr__(self, "index", {r.record_id: r for r in self.records})

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, record_id: str) -> Record:
        return self.index[record_id]

    @property
    def kind_of(self) -> dict[str, AttributeKind]:
        return dict(self.schema)

    @property
    def attribute_names(self) -> list[str]:
        return [name for name, _ in self.schema]

    def normalized(self) -> "RecordSet":
        return RecordSet(self.schema, tuple(r.normalized() for r in self.records))


class AnonymousValueList:
    """Placeholder values whose agreement must never count as match evidence."""

    def __init__(self, values_by_kind: dict[AttributeKind, set[str]]):
        self._values = {k: {normalize_value(v) for v in vs} for k, vs in values_by_kind.items()}

    def is_anonymous(self, value: str | None, kind: AttributeKind) -> bool:
        if value is None:
            return False
        return value in self._values.get(kind, set())

    @classmethod
    def from_json(cls, doc: dict) -> "AnonymousValueList":
        return cls({AttributeKind(k): set(vs) for k, vs in doc.items()})

    def to_json(self) -> dict:
        return {k.value: sorted(v for v in vs if v is not None) for k, vs in self._values.items()}

    @classmethod
    def default(cls) -> "AnonymousValueList":
        text = resources.files("xem.data").joinpath("anonymous_values.json").read_text()
        return cls.from_json(json.loads(text))


def parse_schema(doc: dict) -> tuple[tuple[str, AttributeKind], ...]:
    """Parse the JSON schema descriptor ``{"attributes":[{"name","kind"},...]}``."""
    try:
        attrs = doc["attributes"]
        schema = tuple((a["name"], AttributeKind(a["kind"])) for a in attrs)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad schema descriptor: {exc}") from exc
    if not schema:
        raise SchemaError("schema has no attributes")
    names = [n for n, _ in schema]
    if len(set(names)) != len(names):
        raise SchemaError("schema attribute names not unique")
    return schema


def schema_to_json(schema: tuple[tuple[str, AttributeKind], ...]) -> dict:
    return {"attributes": [{"name": n, "kind": k.value} for n, k in schema]}


def parse_records(data: bytes, fmt: str, schema: tuple[tuple[str, AttributeKind], ...]) -> RecordSet:
    """Parse a CSV (with header) or JSON-lines byte stream into a RecordSet.

    Rows are normalized on ingestion. Unparseable rows raise; nothing is
    silently dropped.
    """
    names = [n for n, _ in schema]
    records: list[Record] = []
    if fmt == "csv":
        text = data.decode("utf-8")
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None:
            raise SchemaError("csv input has no header row")
        header = set(reader.fieldnames)
        missing = {"record_id"} - header
        if missing:
            raise SchemaError(f"csv header missing columns: {sorted(missing)}")
        unknown = header - set(names) - {"record_id", "source_id"}
        if unknown:
            raise SchemaError(f"csv header has columns outside the schema: {sorted(unknown)}")
        for row in reader:
            attrs = {n: row[n] for n in names if n in row and row[n] not in (None, "")}
            records.append(Record(row["record_id"], row.get("source_id", ""), attrs))
    elif fmt == "jsonl":
        for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {lineno}: invalid json: {exc}") from exc
            if "record_id" not in obj:
                raise SchemaError(f"line {lineno}: missing record_id")
            attrs_in = obj.get("attributes", {})
            unknown = set(attrs_in) - set(names)
            if unknown:
                raise SchemaError(f"line {lineno}: attributes outside the schema: {sorted(unknown)}")
            attrs = {k: v for k, v in attrs_in.items() if v not in (None, "")}
            records.append(Record(obj["record_id"], obj.get("source_id", ""), attrs))
    else:
        raise ValueError(f"unsupported format: {fmt!r}")
    return RecordSet(schema, tuple(records)).normalized()


def serialize_records(rs: RecordSet, fmt: str) -> bytes:
    """Inverse of parse_records for round-tripping artifacts."""
    names = rs.attribute_names
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["record_id", "source_id"] + names)
        writer.writeheader()
        for r in rs.records:
            row = {"record_id": r.record_id, "source_id": r.source_id}
            row.update(r.attributes)
            writer.writerow(row)
        return buf.getvalue().encode("utf-8")
    if fmt == "jsonl":
        lines = []
        for r in rs.records:
            lines.append(json.dumps(
                {"record_id": r.record_id, "source_id": r.source_id, "attributes": r.attributes},
                sort_keys=True,
            ))
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValueError(f"unsupported format: {fmt!r}")
