"""Numeric graph construction for the proxy model.

Records become nodes with hashed binary features, entities contribute
member-to-representative star edges, and training pairs are labeled from
the matching engine's output (never from gold clusters).
"""

from __future__ import annotations

import json
import random
import zlib
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linker import Partition
from .matcher import MatchClass, PairScore
from .records import AttributeKind, Record, RecordSet

_NGRAM_KINDS = {AttributeKind.NAME, AttributeKind.ADDRESS, AttributeKind.FREE_TEXT}
_NGRAM_BUCKETS = 64
_EXACT_BUCKETS = 16


def _bucket(text: str, n_buckets: int, salt: str) -> int:
    return zlib.crc32(f"{salt}|{text}".encode("utf-8")) % n_buckets


@dataclass(frozen=True)
class FeatureCodec:
    """Deterministic record-to-vector encoding with a total back-mapping.

    Per attribute: either character-3-gram hashing (name/address/free text)
    or a single exact-value hash bucket (dob/identifier/phone), plus one
    presence bit. Every dimension maps back to exactly one (attribute,
    bucket-or-presence) pair.
    """

    schema: tuple[tuple[str, AttributeKind], ...]
    blocks: dict[str, tuple[int, int]] = field(repr=False, compare=False, default_factory=dict)
    presence: dict[str, int] = field(repr=False, compare=False, default_factory=dict)
    dim: int = field(compare=False, default=0)

    def __post_init__(self):
        blocks, presence = {}, {}
        offset = 0
        for name, kind in self.schema:
            width = _NGRAM_BUCKETS if kind in _NGRAM_KINDS else _EXACT_BUCKETS
            blocks[name] = (offset, width)
            offset += width
        for name, _ in self.schema:
            presence[name] = offset
            offset += 1
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "presence", presence)
        object.__setattr__(self, "dim", offset)

    def encode(self, r: Record) -> np.ndarray:
        x = np.zeros(self.dim)
        for name, kind in self.schema:
            value = r.get(name)
            if value is None:
                continue
            start, width = self.blocks[name]
            if kind in _NGRAM_KINDS:
                if len(value) < 3:
                    x[start + _bucket(value, width, name)] = 1.0
                for i in range(len(value) - 2):
                    x[start + _bucket(value[i:i + 3], width, name)] = 1.0
            else:
                x[start + _bucket(value, width, name)] = 1.0
            x[self.presence[name]] = 1.0
        return x

    def attribute_of(self, dim_index: int) -> str:
        """Back-map a feature dimension to its attribute name."""
        for name, (start, width) in self.blocks.items():
            if start <= dim_index < start + width:
                return name
        for name, bit in self.presence.items():
            if dim_index == bit:
                return name
        raise IndexError(f"dimension {dim_index} out of range (D={self.dim})")

    def dims_of(self, attribute: str) -> list[int]:
        start, width = self.blocks[attribute]
        return list(range(start, start + width)) + [self.presence[attribute]]

    def fingerprint(self) -> str:
        payload = json.dumps([[n, k.value] for n, k in self.schema])
        return f"{zlib.crc32(payload.encode()):08x}-{self.dim}"

    def to_json(self) -> dict:
        return {"schema": [{"name": n, "kind": k.value} for n, k in self.schema],
                "dim": self.dim}

    @classmethod
    def from_json(cls, doc: dict) -> "FeatureCodec":
        return cls(tuple((a["name"], AttributeKind(a["kind"])) for a in doc["schema"]))


@dataclass(frozen=True)
class EntityGraph:
    node_ids: tuple[str, ...]
    features: np.ndarray          # N x D, binary
    edges: tuple[tuple[str, str], ...]
    adj_norm: sp.csr_matrix       # symmetric normalized adjacency with self-loops
    codec: FeatureCodec
    index: dict[str, int] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "index", {rid: i for i, rid in enumerate(self.node_ids)})

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    def node_index(self, record_id: str) -> int:
        try:
            return self.index[record_id]
        except KeyError:
            raise KeyError(f"unknown record id: {record_id!r}") from None


def normalized_adjacency(n: int, edge_index: list[tuple[int, int]]) -> sp.csr_matrix:
    """D^(-1/2) (A + I) D^(-1/2) for an undirected edge list."""
    rows = [i for i, _ in edge_index] + [j for _, j in edge_index] + list(range(n))
    cols = [j for _, j in edge_index] + [i for i, _ in edge_index] + list(range(n))
    a = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    a.data[:] = 1.0  # collapse duplicate edges
    deg = np.asarray(a.sum(axis=1)).ravel()
    d_inv_sqrt = sp.diags(1.0 / np.sqrt(deg))
    return (d_inv_sqrt @ a @ d_inv_sqrt).tocsr()


def build_graph(p: Partition, rs: RecordSet, codec: FeatureCodec) -> EntityGraph:
    """Star graph per entity (members to representative) with encoded features."""
    node_ids = tuple(sorted(rs.index))
    pos = {rid: i for i, rid in enumerate(node_ids)}
    features = np.stack([codec.encode(rs[rid]) for rid in node_ids])
    edges: list[tuple[str, str]] = []
    for e in p.entities:
        edges.extend(e.edges)
    edge_index = [(pos[a], pos[b]) for a, b in edges]
    adj = normalized_adjacency(len(node_ids), edge_index)
    return EntityGraph(node_ids, features, tuple(edges), adj, codec)


@dataclass(frozen=True)
class TrainingPair:
    u: str
    v: str
    label: int
    source: str  # pme_match | pme_nonmatch | sampled_negative


class TrainingSetError(ValueError):
    pass


def make_training_set(scores: list[PairScore], all_ids: list[str],
                      neg_ratio: float = 1.0, seed: int = 0) -> list[TrainingPair]:
    """Positives = Match pairs; negatives = NonMatch pairs topped up with
    sampled non-candidate pairs to neg_ratio * |pos|. Clerical pairs are
    excluded (the engine itself is undecided there)."""
    positives = [TrainingPair(*s.pair, 1, "pme_match")
                 for s in scores if s.match_class is MatchClass.MATCH]
    if not positives:
        raise TrainingSetError("no Match pairs to train on")
    considered = {s.pair for s in scores}
    negatives = [TrainingPair(*s.pair, 0, "pme_nonmatch")
                 for s in scores if s.match_class is MatchClass.NON_MATCH]
    target = round(neg_ratio * len(positives))
    negatives = negatives[:target]
    rng = random.Random(seed)
    ids = sorted(all_ids)
    seen = set(considered)
    while len(negatives) < target:
        a, b = rng.sample(ids, 2)
        pair = (a, b) if a < b else (b, a)
        if pair in seen:
            continue
        seen.add(pair)
        negatives.append(TrainingPair(*pair, 0, "sampled_negative"))
    return positives + negatives
