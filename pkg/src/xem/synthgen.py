"""Deterministic synthetic organization dataset with gold clusters.

Base entities get clean attribute values built from small shipped word lists;
duplicates are derived by per-attribute corruption ops. Randomness is keyed
by (seed, entity index), so generation is order-independent and reproducible.
"""

from __future__ import annotations

import json
import math
import random
import string
from dataclasses import dataclass, field

from .records import AttributeKind, Record, RecordSet

SCHEMA = (
    ("name", AttributeKind.NAME),
    ("address_line", AttributeKind.ADDRESS),
    ("city", AttributeKind.FREE_TEXT),
    ("postal_code", AttributeKind.IDENTIFIER),
    ("phone", AttributeKind.PHONE),
    ("tax_id", AttributeKind.IDENTIFIER),
)

_NAME_FIRST = [
    "acme", "global", "apex", "summit", "pioneer", "vertex", "horizon", "atlas",
    "nova", "quantum", "sterling", "cascade", "beacon", "harbor", "crimson",
    "granite", "silver", "northern", "pacific", "united",
]
_NAME_SECOND = [
    "logistics", "dynamics", "industries", "holdings", "systems", "trading",
    "consulting", "manufacturing", "solutions", "partners", "foods", "energy",
    "textiles", "motors", "chemicals", "analytics",
]
_NAME_SUFFIX = ["inc", "llc", "ltd", "corp", "group", "co"]

_STREETS = [
    "main st", "oak ave", "maple dr", "cedar ln", "park rd", "lake view",
    "hill crest", "river bend", "elm st", "pine ave", "market st", "union sq",
]
_CITIES = [
    "springfield", "riverton", "fairview", "georgetown", "clinton", "salem",
    "madison", "franklin", "arlington", "ashland", "dover", "hudson",
]

ANON_PLACEHOLDERS = {
    "name": "unknown",
    "address_line": "n/a",
    "city": "unknown",
    "postal_code": "999999999",
    "phone": "9999999999",
    "tax_id": "999999999",
}

DEFAULT_CORRUPTION = {
    "name": {"typo": 0.25, "token_swap": 0.10, "truncation": 0.05, "missing": 0.02, "anonymous": 0.01},
    "address_line": {"typo": 0.15, "token_swap": 0.20, "truncation": 0.05, "missing": 0.05, "anonymous": 0.01},
    "city": {"typo": 0.10, "missing": 0.05},
    "postal_code": {"typo": 0.05, "missing": 0.05},
    "phone": {"typo": 0.05, "missing": 0.10, "anonymous": 0.03},
    "tax_id": {"typo": 0.03, "missing": 0.15},
}

_OP_ORDER = ("typo", "token_swap", "truncation", "missing", "anonymous")


@dataclass(frozen=True)
class GenConfig:
    n_base_entities: int = 4200
    mean_duplicates: float = 1.5
    corruption: dict = field(default_factory=lambda: DEFAULT_CORRUPTION)
    seed: int = 42

    @classmethod
    def from_json(cls, doc: dict) -> "GenConfig":
        return cls(
            n_base_entities=doc.get("n_base_entities", 4200),
            mean_duplicates=doc.get("mean_duplicates", 1.5),
            corruption=doc.get("corruption", DEFAULT_CORRUPTION),
            seed=doc.get("seed", 42),
        )

    def to_json(self) -> dict:
        return {
            "n_base_entities": self.n_base_entities,
            "mean_duplicates": self.mean_duplicates,
            "corruption": self.corruption,
            "seed": self.seed,
        }


GoldClusters = dict  # record_id -> gold_entity_id


def corrupt(value: str, op: str, rng: random.Random) -> str | None:
    """Apply one corruption op; typo guarantees edit distance exactly 1."""
    if op == "missing":
        return None
    if op == "typo":
        i = rng.randrange(len(value))
        alphabet = string.digits if value[i].isdigit() else string.ascii_lowercase
        repl = rng.choice([c for c in alphabet if c != value[i]])
        return value[:i] + repl + value[i + 1:]
    if op == "token_swap":
        tokens = value.split()
        if len(tokens) < 2:
            return value
        i = rng.randrange(len(tokens) - 1)
        tokens[i], tokens[i + 1] = tokens[i + 1], tokens[i]
        return " ".join(tokens)
    if op == "truncation":
        drop = math.ceil(0.2 * len(value))
        return value[:-drop] if drop < len(value) else value[:1]
    raise ValueError(f"unknown corruption op: {op!r}")


def _base_attributes(rng: random.Random) -> dict[str, str]:
    name = f"{rng.choice(_NAME_FIRST)} {rng.choice(_NAME_SECOND)} {rng.choice(_NAME_SUFFIX)}"
    return {
        "name": name,
        "address_line": f"{rng.randrange(1, 9999)} {rng.choice(_STREETS)}",
        "city": rng.choice(_CITIES),
        "postal_code": f"{rng.randrange(10000, 99999)}",
        "phone": f"{rng.randrange(2_000_000_000, 9_999_999_999)}",
        "tax_id": f"{rng.randrange(100_000_000, 999_999_999)}",
    }


def _duplicate_of(base: dict[str, str], corruption: dict, rng: random.Random) -> dict[str, str]:
    attrs: dict[str, str] = {}
    for attr, value in base.items():
        ops = corruption.get(attr, {})
        v: str | None = value
        for op in _OP_ORDER:
            p = ops.get(op, 0.0)
            if p <= 0.0 or rng.random() >= p:
                continue
            if op == "anonymous":
                v = ANON_PLACEHOLDERS[attr]
                break
            if v is None or (op != "missing" and not v):
                continue
            v = corrupt(v, op, rng)
            if v is None:
                break
        if v is not None:
            attrs[attr] = v
    return attrs


def generate(cfg: GenConfig) -> tuple[RecordSet, GoldClusters]:
    """Generate the organization corpus; fully deterministic given cfg."""
    records: list[Record] = []
    gold: GoldClusters = {}
    for idx in range(cfg.n_base_entities):
        rng = random.Random(f"{cfg.seed}|{idx}")
        gid = f"e{idx:05d}"
        base = _base_attributes(rng)
        # duplicates ~ geometric on {0,1,...} with the configured mean
        p = 1.0 / (1.0 + cfg.mean_duplicates)
        n_dup = 0
        while rng.random() > p and n_dup < 10:
            n_dup += 1
        for dup in range(n_dup + 1):
            rid = f"r{idx:05d}_{dup}"
            attrs = dict(base) if dup == 0 else _duplicate_of(base, cfg.corruption, rng)
            records.append(Record(rid, f"src{dup % 3}", attrs))
            gold[rid] = gid
    records.sort(key=lambda r: r.record_id)
    return RecordSet(SCHEMA, tuple(records)).normalized(), gold


def write_gold(gold: GoldClusters) -> bytes:
    return json.dumps(gold, sort_keys=True, indent=0).encode("utf-8")


def read_gold(data: bytes) -> GoldClusters:
    return json.loads(data.decode("utf-8"))
