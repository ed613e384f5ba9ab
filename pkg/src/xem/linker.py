"""Transitive linking of match pairs into entities, with manual unlink rules."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .matcher import MatchClass, PairScore, canonical_pair
from .records import AnonymousValueList, RecordSet


@dataclass(frozen=True)
class UnlinkRule:
    pair: tuple[str, str]
    author: str = ""
    created_at: str = ""

    def to_json(self) -> dict:
        return {"a": self.pair[0], "b": self.pair[1], "author": self.author,
                "created_at": self.created_at}

    @classmethod
    def from_json(cls, doc: dict) -> "UnlinkRule":
        return cls(canonical_pair(doc["a"], doc["b"]), doc.get("author", ""),
                   doc.get("created_at", ""))


@dataclass(frozen=True)
class Entity:
    entity_id: str
    members: frozenset[str]
    representative: str

    @property
    def edges(self) -> list[tuple[str, str]]:
        """Member-to-representative star edges; |edges| = |members| - 1."""
        return [(m, self.representative) for m in sorted(self.members)
                if m != self.representative]


@dataclass(frozen=True)
class Partition:
    entities: tuple[Entity, ...]
    index: dict[str, str] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "index",
            {m: e.entity_id for e in self.entities for m in e.members})

    def entity_of(self, record_id: str) -> Entity | None:
        eid = self.index.get(record_id)
        if eid is None:
            return None
        return self.by_id(eid)

    def by_id(self, entity_id: str) -> Entity | None:
        for e in self.entities:
            if e.entity_id == entity_id:
                return e
        return None

    def to_json(self) -> dict:
        return {"entities": [
            {"id": e.entity_id, "representative": e.representative,
             "members": sorted(e.members)}
            for e in self.entities]}

    @classmethod
    def from_json(cls, doc: dict) -> "Partition":
        return cls(tuple(
            Entity(e["id"], frozenset(e["members"]), e["representative"])
            for e in doc["entities"]))


class DisjointSet:
    """Union-find with path compression and union by size."""

    def __init__(self, ids):
        self.parent = {x: x for x in ids}
        self.size = {x: 1 for x in ids}

    def find(self, x: str) -> str:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]

    def components(self) -> dict[str, set[str]]:
        comps: dict[str, set[str]] = {}
        for x in self.parent:
            comps.setdefault(self.find(x), set()).add(x)
        return comps


def select_representative(members: set[str], records: RecordSet,
                          anon: AnonymousValueList | None = None) -> str:
    """Most-complete member wins; ties break to the lexicographically
    smallest record_id."""
    anon = anon or AnonymousValueList({})
    kind_of = records.kind_of
    best_id, best_filled = None, -1
    for rid in sorted(members):
        filled = records[rid].filled_count(anon, kind_of)
        if filled > best_filled:
            best_id, best_filled = rid, filled
    return best_id


def match_edges(pairs: list[PairScore],
                rules: list[UnlinkRule] | None = None) -> set[tuple[str, str]]:
    """Match-class edges minus edges named by unlink rules."""
    unlinked = {r.pair for r in (rules or [])}
    return {p.pair for p in pairs
            if p.match_class is MatchClass.MATCH and p.pair not in unlinked}


def link(pairs: list[PairScore], rules: list[UnlinkRule], all_ids: set[str],
         records: RecordSet | None = None,
         anon: AnonymousValueList | None = None) -> Partition:
    """Connected components over Match edges (unlinked edges removed).

    Records untouched by any edge become singletons. entity_id = smallest
    member id; the representative is the most-complete member when the
    record set is given, else the smallest id.
    """
    edges = match_edges(pairs, rules)
    dsu = DisjointSet(all_ids)
    for a, b in edges:
        dsu.union(a, b)
    entities = []
    for members in dsu.components().values():
        eid = min(members)
        rep = select_representative(members, records, anon) if records else eid
        entities.append(Entity(eid, frozenset(members), rep))
    entities.sort(key=lambda e: e.entity_id)
    return Partition(tuple(entities))


def non_separating_rules(pairs: list[PairScore], rules: list[UnlinkRule],
                         all_ids: set[str]) -> list[UnlinkRule]:
    """Rules whose endpoints remain connected via another path after removal."""
    if not rules:
        return []
    edges = match_edges(pairs, rules)
    dsu = DisjointSet(all_ids)
    for a, b in edges:
        dsu.union(a, b)
    return [r for r in rules
            if r.pair[0] in dsu.parent and r.pair[1] in dsu.parent
            and dsu.find(r.pair[0]) == dsu.find(r.pair[1])]


def entity_size_histogram(p: Partition) -> dict[int, int]:
    return dict(Counter(len(e.members) for e in p.entities))


def write_unlink_log(rules: list[UnlinkRule]) -> bytes:
    return ("\n".join(json.dumps(r.to_json(), sort_keys=True) for r in rules)
            + ("\n" if rules else "")).encode("utf-8")


def read_unlink_log(data: bytes) -> list[UnlinkRule]:
    return [UnlinkRule.from_json(json.loads(line))
            for line in data.decode("utf-8").splitlines() if line.strip()]
