"""Probabilistic matching engine: comparators, weight tables, blocking and scoring.

Per-attribute similarities are combined with log2 likelihood-ratio weights;
partial agreement interpolates linearly between the disagree and agree
weights. Pairs are bucketed into Match / Clerical / NonMatch by thresholds.
"""

from __future__ import annotations

import functools
import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum

from .records import AnonymousValueList, AttributeKind, Record, RecordSet


class CompareStatus(str, Enum):
    COMPARED = "Compared"
    MISSING_VALUE = "MissingValue"
    SUPPRESSED = "Suppressed"


class MatchClass(str, Enum):
    MATCH = "Match"
    CLERICAL = "Clerical"
    NON_MATCH = "NonMatch"


class ConfigError(ValueError):
    """Invalid matcher configuration (weights, thresholds, blocking)."""


@dataclass(frozen=True)
class ComparatorResult:
    status: CompareStatus
    similarity: float | None = None

    def __post_init__(self):
        if (self.status is CompareStatus.COMPARED) != (self.similarity is not None):
            raise ValueError("similarity defined exactly when status is Compared")


def levenshtein_similarity(a: str, b: str) -> float:
    """1 - editdistance(a, b) / max(|a|, |b|); 1.0 when both empty."""
    if a == b:
        return 1.0
    denom = max(len(a), len(b))
    if min(len(a), len(b)) == 0:
        return 0.0
    # stripping a shared prefix/suffix preserves the edit distance
    lo = 0
    hi_a, hi_b = len(a), len(b)
    while lo < hi_a and lo < hi_b and a[lo] == b[lo]:
        lo += 1
    while hi_a > lo and hi_b > lo and a[hi_a - 1] == b[hi_b - 1]:
        hi_a -= 1
        hi_b -= 1
    a, b = a[lo:hi_a], b[lo:hi_b]
    n, m = len(a), len(b)
    if m == 0 or n == 0:
        return 1.0 - max(n, m) / denom
    if n < m:
        a, b, n, m = b, a, m, n
    # two-row DP; b is the shorter string
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        ca = a[i - 1]
        cur = [i] + [0] * m
        for j in range(1, m + 1):
            cost = 0 if ca == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return 1.0 - prev[m] / denom


def token_jaccard(a: str, b: str) -> float:
    """Jaccard similarity of whitespace token sets; 1.0 when both empty."""
    ta, tb = set(a.split()), set(b.split())
    if not ta and not tb:
        return 1.0
    return len(ta & tb) / len(ta | tb)


_NON_DIGIT = re.compile(r"\D")


def _exact(a: str, b: str) -> float:
    return 1.0 if a == b else 0.0


def _phone_exact(a: str, b: str) -> float:
    return _exact(_NON_DIGIT.sub("", a), _NON_DIGIT.sub("", b))


_COMPARATORS = {
    AttributeKind.NAME: levenshtein_similarity,
    AttributeKind.ADDRESS: token_jaccard,
    AttributeKind.DOB: _exact,
    AttributeKind.IDENTIFIER: _exact,
    AttributeKind.PHONE: _phone_exact,
    AttributeKind.FREE_TEXT: token_jaccard,
}


def compare_attribute(
    a: str | None, b: str | None, kind: AttributeKind, anon: AnonymousValueList
) -> ComparatorResult:
    if a is None or b is None:
        return ComparatorResult(CompareStatus.MISSING_VALUE)
    if anon.is_anonymous(a, kind) or anon.is_anonymous(b, kind):
        return ComparatorResult(CompareStatus.SUPPRESSED)
    sim = _COMPARATORS[kind](a, b)
    return ComparatorResult(CompareStatus.COMPARED, sim)


@dataclass(frozen=True)
class AttributeWeights:
    m_prob: float
    u_prob: float

    def __post_init__(self):
        if not (0.0 < self.m_prob < 1.0 and 0.0 < self.u_prob < 1.0):
            raise ConfigError(f"m/u probabilities must lie in (0,1): m={self.m_prob}, u={self.u_prob}")
        if self.m_prob <= self.u_prob:
            raise ConfigError(f"m_prob must exceed u_prob (m={self.m_prob}, u={self.u_prob})")

    @functools.cached_property
    def agree_weight(self) -> float:
        return math.log2(self.m_prob / self.u_prob)

    @functools.cached_property
    def disagree_weight(self) -> float:
        return math.log2((1.0 - self.m_prob) / (1.0 - self.u_prob))


class WeightTable:
    def __init__(self, weights: dict[str, AttributeWeights]):
        self.weights = dict(weights)

    def __contains__(self, attr: str) -> bool:
        return attr in self.weights

    def __getitem__(self, attr: str) -> AttributeWeights:
        return self.weights[attr]

    @classmethod
    def from_json(cls, doc: dict) -> "WeightTable":
        return cls({name: AttributeWeights(w["m"], w["u"]) for name, w in doc.items()})

    def to_json(self) -> dict:
        return {name: {"m": w.m_prob, "u": w.u_prob} for name, w in self.weights.items()}


@dataclass(frozen=True)
class Thresholds:
    autolink: float
    clerical: float

    def __post_init__(self):
        if self.autolink < self.clerical:
            raise ConfigError(f"autolink ({self.autolink}) must be >= clerical ({self.clerical})")


def canonical_pair(a: str, b: str) -> tuple[str, str]:
    if a == b:
        raise ValueError(f"pair ids must be distinct: {a!r}")
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class ComparisonVector:
    pair: tuple[str, str]
    results: dict[str, ComparatorResult]


@dataclass
class PairScore:
    pair: tuple[str, str]
    total: float
    contributions: dict[str, float]
    match_class: MatchClass | None = None

    def to_json(self) -> dict:
        return {
            "a": self.pair[0],
            "b": self.pair[1],
            "total": self.total,
            "class": self.match_class.value if self.match_class else None,
            "contrib": self.contributions,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PairScore":
        return cls(
            pair=(doc["a"], doc["b"]),
            total=doc["total"],
            contributions=doc["contrib"],
            match_class=MatchClass(doc["class"]) if doc.get("class") else None,
        )


# ---------------------------------------------------------------------------
# Blocking


@dataclass(frozen=True)
class BlockingKey:
    """One deterministic key over an attribute: full value or a prefix of it."""

    attribute: str
    prefix_len: int | None = None  # None = exact value

    def key_for(self, r: Record) -> str | None:
        v = r.get(self.attribute)
        if v is None:
            return None
        return v[: self.prefix_len] if self.prefix_len else v


@dataclass(frozen=True)
class BlockingConfig:
    keys: tuple[BlockingKey, ...]
    max_block_size: int = 500

    def __post_init__(self):
        if not self.keys:
            raise ConfigError("blocking config needs at least one key")

    @classmethod
    def from_json(cls, doc: dict) -> "BlockingConfig":
        keys = tuple(
            BlockingKey(k["attribute"], k.get("prefix_len")) for k in doc["keys"]
        )
        return cls(keys, doc.get("max_block_size", 500))

    def to_json(self) -> dict:
        return {
            "keys": [
                {"attribute": k.attribute, **({"prefix_len": k.prefix_len} if k.prefix_len else {})}
                for k in self.keys
            ],
            "max_block_size": self.max_block_size,
        }


@dataclass
class BlockingStats:
    oversized_blocks: int = 0
    pairs: int = 0


def candidate_pairs(
    rs: RecordSet, cfg: BlockingConfig, stats: BlockingStats | None = None
) -> set[tuple[str, str]]:
    """Union over blocking keys of all within-block pairs, canonical and deduped.

    Blocks larger than max_block_size are skipped and counted, not expanded.
    """
    pairs: set[tuple[str, str]] = set()
    oversized = 0
    for key in cfg.keys:
        blocks: dict[str, list[str]] = {}
        for r in rs.records:
            kv = key.key_for(r)
            if kv is not None:
                blocks.setdefault(kv, []).append(r.record_id)
        for members in blocks.values():
            if len(members) > cfg.max_block_size:
                oversized += 1
                continue
            members.sort()
            for i in range(len(members)):
                for j in range(i + 1, len(members)):
                    pairs.add((members[i], members[j]))
    if stats is not None:
        stats.oversized_blocks = oversized
        stats.pairs = len(pairs)
    return pairs


# ---------------------------------------------------------------------------
# Scoring


def compare_pair(
    a: Record, b: Record, kind_of: dict[str, AttributeKind], anon: AnonymousValueList
) -> ComparisonVector:
    pair = canonical_pair(a.record_id, b.record_id)
    results = {
        name: compare_attribute(a.get(name), b.get(name), kind, anon)
        for name, kind in kind_of.items()
    }
    return ComparisonVector(pair, results)


def score_pair(cv: ComparisonVector, wt: WeightTable) -> PairScore:
    contributions: dict[str, float] = {}
    for name, result in cv.results.items():
        if name not in wt:
            raise ConfigError(f"attribute {name!r} has no weights configured")
        if result.status is not CompareStatus.COMPARED:
            contributions[name] = 0.0
            continue
        w = wt[name]
        contributions[name] = w.disagree_weight + result.similarity * (
            w.agree_weight - w.disagree_weight
        )
    return PairScore(cv.pair, sum(contributions.values()), contributions)


def classify(ps: PairScore, th: Thresholds) -> PairScore:
    if ps.total >= th.autolink:
        ps.match_class = MatchClass.MATCH
    elif ps.total >= th.clerical:
        ps.match_class = MatchClass.CLERICAL
    else:
        ps.match_class = MatchClass.NON_MATCH
    return ps


class PairScorer:
    """Precompiled scorer for one (schema, weights, anonymous-list) triple.

    Produces output identical to compare_pair + score_pair + classify but
    skips per-attribute object construction on the hot path.
    """

    def __init__(self, rs: RecordSet, wt: WeightTable, th: Thresholds,
                 anon: AnonymousValueList):
        self.th = th
        self.plan = []
        for name, kind in rs.schema:
            if name not in wt:
                raise ConfigError(f"attribute {name!r} has no weights configured")
            w = wt[name]
            anon_set = anon._values.get(kind, set())
            self.plan.append((name, _COMPARATORS[kind], anon_set,
                              w.disagree_weight, w.agree_weight - w.disagree_weight))

    def score(self, a: Record, b: Record) -> PairScore:
        contributions = {}
        total = 0.0
        a_attrs, b_attrs = a.attributes, b.attributes
        for name, cmp_fn, anon_set, dw, delta in self.plan:
            va = a_attrs.get(name)
            vb = b_attrs.get(name)
            if va is None or vb is None or va in anon_set or vb in anon_set:
                contributions[name] = 0.0
                continue
            c = dw + cmp_fn(va, vb) * delta
            contributions[name] = c
            total += c
        ps = PairScore(canonical_pair(a.record_id, b.record_id), total, contributions)
        return classify(ps, self.th)


def run_matching(
    rs: RecordSet,
    cfg: BlockingConfig,
    wt: WeightTable,
    th: Thresholds,
    anon: AnonymousValueList,
    stats: BlockingStats | None = None,
) -> list[PairScore]:
    """Compare, score and classify every candidate pair; deterministic output
    sorted by canonical pair. NonMatch pairs are retained (proxy-training
    negatives)."""
    scorer = PairScorer(rs, wt, th, anon)
    index = rs.index
    return [scorer.score(index[a_id], index[b_id])
            for a_id, b_id in sorted(candidate_pairs(rs, cfg, stats))]


def write_pair_scores(scores: list[PairScore]) -> bytes:
    return (
        "\n".join(json.dumps(s.to_json(), sort_keys=True) for s in scores) + "\n"
    ).encode("utf-8")


def read_pair_scores(data: bytes) -> list[PairScore]:
    return [
        PairScore.from_json(json.loads(line))
        for line in data.decode("utf-8").splitlines()
        if line.strip()
    ]


def default_weight_table(rs_schema) -> WeightTable:
    """Reasonable default m/u probabilities per attribute kind."""
    defaults = {
        AttributeKind.NAME: AttributeWeights(0.95, 0.01),
        AttributeKind.ADDRESS: AttributeWeights(0.90, 0.02),
        AttributeKind.DOB: AttributeWeights(0.95, 0.005),
        AttributeKind.IDENTIFIER: AttributeWeights(0.95, 0.0005),
        AttributeKind.PHONE: AttributeWeights(0.90, 0.001),
        AttributeKind.FREE_TEXT: AttributeWeights(0.85, 0.05),
    }
    return WeightTable({name: defaults[kind] for name, kind in rs_schema})
